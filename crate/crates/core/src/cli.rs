//! Experiment orchestration behind the `resolvent-lab` binary.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use num_rational::BigRational;
use rayon::prelude::*;
use thiserror::Error;

use crate::audit::AuditReport;
use crate::config::{ExperimentConfig, SequenceKind};
use crate::metastability::{
    audit_asymptotic_regularity, audit_projection_inequality, audit_resolvent_pairing_bounds, audit_sunny, estimate_q,
    find_metastable_n, generate_curve, Curve, MetastabilityError, ResolventBoundCase,
};
use crate::moduli::{
    check_lambda_moduli, check_t_moduli, verify_omega_property, verify_psi_property, Flagged, ModuliChain, ModuliError,
    SequenceModuli, TSequence,
};
use crate::operators::{
    check_kato_equivalence, check_pseudocontraction, sample_point_pairs, OperatorKind, KATO_LAMBDAS,
};
use crate::resolvent::{check_domain_closure, check_resolvent_nonexpansive, Resolver, AUDIT_LAMBDAS};
use crate::scalar::{rational_from_decimal, Scalar};
use crate::space::{verify_convexity_modulus, verify_smoothness_modulus, Vector};
use crate::zoo::{self, ZooEntry};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Moduli,
    Curve,
    Metastab,
    Audit,
    All,
}

impl Command {
    fn includes(self, other: Command) -> bool {
        self == Command::All || self == other
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error:\n{}", .0.join("\n"))]
    Config(Vec<String>),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    /// Process exit code for the error.
    pub fn exit_code(&self) -> i32 {
        2
    }
}

/// What a run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    pub failures: Vec<String>,
    pub summary: String,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.failures.is_empty() {
            0
        } else {
            1
        }
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(vec![format!("{}: {e}", path.display())]))?;
    crate::config::validate(&text).map_err(|errs| CliError::Config(errs.iter().map(ToString::to_string).collect()))
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Vec<u8> {
    w.into_inner().expect("in-memory writer")
}

struct Context {
    cfg: ExperimentConfig,
    entry: ZooEntry,
    base_point: Vector,
    resolver: Resolver,
    b: u32,
    chain: ModuliChain,
}

impl Context {
    fn new(cfg: ExperimentConfig) -> Self {
        let space = cfg.space();
        let entry = zoo::build(&cfg.operator, &space).expect("validated operator");
        let base_point = cfg
            .base_point
            .clone()
            .map(Vector::from_vec)
            .unwrap_or_else(|| entry.base_point.clone());
        let resolver = Resolver::new(space).with_tol(cfg.tolerances.resolvent);
        let b = cfg
            .moduli
            .b
            .unwrap_or_else(|| entry.operator.domain().integer_diameter_bound(&space).unwrap_or(1));
        let chain = cfg.chain(b);
        Self {
            cfg,
            entry,
            base_point,
            resolver,
            b,
            chain,
        }
    }
}

/// One row of moduli.csv.
struct ModuliRow {
    quantity: &'static str,
    eps: f64,
    lambda: Option<f64>,
    c: Option<u64>,
    d: Option<u64>,
    m: Option<u64>,
    n: Option<u64>,
}

fn moduli_rows(eps_grid: &[f64]) -> Vec<ModuliRow> {
    let base = |quantity, eps| ModuliRow {
        quantity,
        eps,
        lambda: None,
        c: None,
        d: None,
        m: None,
        n: None,
    };
    let mut rows = Vec::new();
    for &eps in eps_grid {
        rows.push(base("psi", eps));
        rows.push(base("omega_tau", eps));
        rows.push(base("eta1", eps));
        rows.push(base("eta2", eps));
        for lambda in [1.0, 10.0] {
            rows.push(ModuliRow {
                lambda: Some(lambda),
                ..base("delta", eps)
            });
        }
        for c in [0, 1, 10] {
            rows.push(ModuliRow {
                c: Some(c),
                ..base("beta", eps)
            });
            rows.push(ModuliRow {
                c: Some(c),
                d: Some(c),
                ..base("q_mod", eps)
            });
            rows.push(ModuliRow {
                c: Some(c),
                d: Some(c),
                ..base("nu1", eps)
            });
        }
        for (m, n) in [(0, 0), (3, 1)] {
            rows.push(ModuliRow {
                m: Some(m),
                n: Some(n),
                ..base("nu1_star", eps)
            });
        }
    }
    rows
}

fn eval_row<S: Scalar>(
    chain: &ModuliChain,
    gamma: &crate::scalar::IndexFn,
    row: &ModuliRow,
    eps: &S,
    lambda: Option<S>,
) -> Result<Flagged<S>, ModuliError> {
    let plain = |v: S| Flagged {
        value: v,
        clamped: false,
    };
    match row.quantity {
        "psi" => chain.psi(eps).map(plain),
        "omega_tau" => chain.omega_tau(eps).map(plain),
        "eta1" => chain.eta1(eps).map(plain),
        "eta2" => chain.eta2(eps),
        "delta" => chain.delta(eps, &lambda.expect("delta row has lambda")),
        "beta" => chain.beta(gamma, row.c.unwrap_or(0), eps).map(plain),
        "q_mod" => chain
            .q_mod(gamma, row.c.unwrap_or(0), row.d.unwrap_or(0), eps)
            .map(plain),
        "nu1" => chain.nu1(gamma, row.c.unwrap_or(0), row.d.unwrap_or(0), eps),
        _ => chain.nu1_star(gamma, row.m.unwrap_or(0), row.n.unwrap_or(0), eps),
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn moduli_csv(ctx: &Context, failures: &mut Vec<String>) -> Vec<u8> {
    let gamma = ctx.cfg.sequence.lambda_moduli().gamma;
    let mut chain = ctx.chain.clone();
    if let Some(g) = ctx.cfg.counterfunctions.first() {
        chain = chain.with_counterfunction(g.clone());
    }
    let exact = chain.supports_exact();
    let mut w = csv_writer();
    w.write_record([
        "quantity",
        "eps",
        "lambda",
        "c",
        "d",
        "m",
        "n",
        "float_value",
        "exact_value",
        "clamped",
    ])
    .expect("in-memory");
    for row in moduli_rows(&ctx.cfg.epsilons) {
        let float = eval_row(&chain, &gamma, &row, &row.eps, row.lambda);
        let exact_value = if exact {
            let eps_q = rational_from_decimal(row.eps).expect("finite epsilon");
            let lambda_q = row.lambda.map(|l| rational_from_decimal(l).expect("finite lambda"));
            match eval_row::<BigRational>(&chain, &gamma, &row, &eps_q, lambda_q) {
                Ok(v) => v.value.to_string(),
                Err(e) => format!("error: {e}"),
            }
        } else {
            String::new()
        };
        let (float_value, clamped) = match float {
            // Every tabulated quantity is positive; a zero is f64 underflow.
            Ok(v) if v.value == 0.0 => ("underflow".to_string(), v.clamped.to_string()),
            Ok(v) => (num(v.value), v.clamped.to_string()),
            Err(e) => {
                failures.push(format!("moduli {} eps={}: {e}", row.quantity, row.eps));
                (format!("error: {e}"), String::new())
            }
        };
        w.write_record([
            row.quantity.to_string(),
            num(row.eps),
            row.lambda.map(num).unwrap_or_default(),
            opt(row.c),
            opt(row.d),
            opt(row.m),
            opt(row.n),
            float_value,
            exact_value,
            clamped,
        ])
        .expect("in-memory");
    }
    finish(w)
}

fn curve_csv(ctx: &Context, curve: &Curve) -> Vec<u8> {
    let mut w = csv_writer();
    let mut header = vec!["n".to_string(), "lambda".to_string()];
    header.extend((0..ctx.cfg.dim).map(|i| format!("x{i}")));
    header.push("residual".into());
    w.write_record(&header).expect("in-memory");
    for (n, ((pt, lambda), res)) in curve
        .points
        .iter()
        .zip(&curve.lambdas)
        .zip(&curve.residuals)
        .enumerate()
    {
        let mut rec = vec![n.to_string(), num(*lambda)];
        rec.extend(pt.coords().iter().map(|c| num(*c)));
        rec.push(num(*res));
        w.write_record(&rec).expect("in-memory");
    }
    finish(w)
}

fn metastab_csv(ctx: &Context, curve: &Curve, failures: &mut Vec<String>) -> Vec<u8> {
    let space = ctx.cfg.space();
    let cells: Vec<(f64, &crate::metastability::Counterfunction)> = ctx
        .cfg
        .epsilons
        .iter()
        .flat_map(|e| ctx.cfg.counterfunctions.iter().map(move |g| (*e, g)))
        .collect();
    let results: Vec<Result<_, MetastabilityError>> = cells
        .par_iter()
        .map(|(eps, g)| find_metastable_n(curve, &space, *eps, g, curve.len() as u64))
        .collect();
    let mut w = csv_writer();
    w.write_record([
        "operator",
        "p",
        "eps",
        "g_label",
        "N_found",
        "window_max_gap",
        "curve_length",
    ])
    .expect("in-memory");
    for ((eps, g), res) in cells.iter().zip(results) {
        let (n, gap) = match res {
            Ok(found) => (found.n.to_string(), num(found.window_max_gap)),
            Err(e) => {
                failures.push(format!("metastab eps={eps} g={g}: {e}"));
                ("not_found".to_string(), String::new())
            }
        };
        w.write_record([
            ctx.entry.name.to_string(),
            num(ctx.cfg.p),
            num(*eps),
            g.label(),
            n,
            gap,
            curve.len().to_string(),
        ])
        .expect("in-memory");
    }
    finish(w)
}

fn sequence_audits(ctx: &Context) -> Vec<AuditReport> {
    let horizon = ctx.cfg.sequence.n_max.min(200);
    match ctx.cfg.sequence.kind {
        SequenceKind::Lambda => {
            vec![check_lambda_moduli(
                &ctx.cfg.sequence.lambda_sequence(),
                &SequenceModuli::for_n_plus_one(),
                horizon,
            )]
        }
        SequenceKind::T => vec![
            check_t_moduli(
                &TSequence::one_minus_inv_n_plus_2(),
                &SequenceModuli::for_default_t(),
                horizon,
            ),
            check_lambda_moduli(
                &ctx.cfg.sequence.lambda_sequence(),
                &ctx.cfg.sequence.lambda_moduli(),
                horizon,
            ),
        ],
    }
}

fn failed_report(name: String, tol: f64, why: String) -> AuditReport {
    let mut r = AuditReport::new(name, tol);
    r.record(f64::INFINITY, || why);
    r
}

fn collect_audits(ctx: &Context, curve: &Curve) -> Vec<AuditReport> {
    let cfg = &ctx.cfg;
    let space = cfg.space();
    let a = &ctx.entry.operator;
    let tol = cfg.tolerances.audit;
    let samples = cfg.samples;
    let seed = cfg.seed;
    let b = ctx.b as f64;
    let mut out = sequence_audits(ctx);

    // Geometry of the space.
    let eta = cfg.convexity_modulus();
    let tau = cfg.smoothness_modulus();
    let geometry: Vec<AuditReport> = cfg
        .epsilons
        .par_iter()
        .flat_map(|&eps| {
            let mut v = Vec::new();
            let sub = seed.wrapping_add((eps * 1e6) as u64);
            v.push(
                verify_convexity_modulus(&space, &eta, eps, samples, sub)
                    .unwrap_or_else(|e| failed_report("convexity_modulus".into(), 0.0, e.to_string())),
            );
            v.push(
                verify_smoothness_modulus(&space, &tau, eps, samples, sub)
                    .unwrap_or_else(|e| failed_report("smoothness_modulus".into(), 0.0, e.to_string())),
            );
            v.push(
                verify_psi_property(&space, &eta, b, eps, samples, sub)
                    .unwrap_or_else(|e| failed_report("psi_property".into(), 0.0, e.to_string())),
            );
            v.push(
                verify_omega_property(&space, &tau, b, eps, samples, sub)
                    .unwrap_or_else(|e| failed_report("omega_property".into(), 0.0, e.to_string())),
            );
            v
        })
        .collect();
    out.extend(geometry);

    // The operator.
    let pairs = sample_point_pairs(&space, a.domain(), samples.min(500), seed);
    let kato = check_kato_equivalence(&space, a, &KATO_LAMBDAS, &pairs);
    let mut agree = AuditReport::new(format!("kato_agreement[{}]", a.label()), 0.0);
    agree.record(if kato.agree() { 0.0 } else { 1.0 }, || {
        "metric and dual verdicts differ".into()
    });
    out.push(kato.metric);
    out.push(kato.dual);
    out.push(agree);
    if let OperatorKind::IdMinus(t) = a.kind() {
        let psc = check_pseudocontraction(t, &space, &pairs, &[0.1, 1.0, 10.0]);
        out.push(psc.metric);
        out.push(psc.dual);
    }
    let few: Vec<(Vector, Vector)> = pairs.iter().take(40).cloned().collect();
    let resolvent_audits: Vec<AuditReport> = AUDIT_LAMBDAS
        .par_iter()
        .map(|&lambda| check_resolvent_nonexpansive(&ctx.resolver, a, lambda, &few, &ctx.entry.zeros))
        .collect();
    out.extend(resolvent_audits);
    let pts: Vec<Vector> = few.iter().map(|(x, _)| x.clone()).collect();
    out.push(check_domain_closure(&ctx.resolver, a, &AUDIT_LAMBDAS, &pts));

    // The curve.
    out.push(audit_asymptotic_regularity(&ctx.resolver, curve, a, b, tol));
    let zero = &ctx.entry.zeros[0];
    out.push(audit_projection_inequality(curve, a, zero, &space, tol));
    for &eps in &cfg.epsilons {
        for lambda in [1.0, 10.0] {
            let case = ResolventBoundCase {
                a,
                x: &ctx.base_point,
                chain: &ctx.chain,
                eps,
                tol,
            };
            out.push(audit_resolvent_pairing_bounds(&ctx.resolver, &case, lambda, zero));
        }
    }
    let tail = cfg.tolerances.lambda_tail;
    out.push(match estimate_q(&ctx.resolver, a, &ctx.base_point, tail, b) {
        Ok(q) => audit_sunny(
            &ctx.resolver,
            a,
            &ctx.base_point,
            &q,
            &ctx.entry.zeros,
            tail,
            tol.max(1e-6),
        ),
        Err(e) => failed_report(format!("sunny[{}]", a.label()), tol, e.to_string()),
    });
    out
}

fn audit_csv(reports: &[AuditReport]) -> Vec<u8> {
    let mut w = csv_writer();
    w.write_record(["name", "passed", "worst_margin", "tolerance", "witness"])
        .expect("in-memory");
    for r in reports {
        let witness = match (&r.inapplicable, &r.witness) {
            (Some(why), _) => format!("inapplicable: {why}"),
            (None, Some(wit)) => wit.clone(),
            (None, None) => String::new(),
        };
        w.write_record([
            r.name.clone(),
            r.passed.to_string(),
            num(r.worst_margin),
            num(r.tolerance),
            witness,
        ])
        .expect("in-memory");
    }
    finish(w)
}

fn write_file(dir: &Path, name: &str, bytes: &[u8], files: &mut Vec<PathBuf>) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|source| CliError::Io {
        path: path.clone(),
        source,
    })?;
    files.push(path);
    Ok(())
}

/// Runs `command` for a validated config and writes its files to `out_dir`.
pub fn run(command: Command, cfg: ExperimentConfig, out_dir: &Path) -> Result<RunOutcome, CliError> {
    fs::create_dir_all(out_dir).map_err(|source| CliError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let ctx = Context::new(cfg);
    let mut files = Vec::new();
    let mut failures = Vec::new();
    let mut summary = String::new();
    let _ = writeln!(
        summary,
        "operator {} on l_{}^{} (b = {}), sequence {}, seed {}",
        ctx.entry.name,
        ctx.cfg.p,
        ctx.cfg.dim,
        ctx.b,
        ctx.cfg.sequence.lambda_sequence().label(),
        ctx.cfg.seed
    );

    if command.includes(Command::Moduli) {
        let bytes = moduli_csv(&ctx, &mut failures);
        write_file(out_dir, "moduli.csv", &bytes, &mut files)?;
        let _ = writeln!(summary, "moduli: {} rows", moduli_rows(&ctx.cfg.epsilons).len());
    }

    let needs_curve = command != Command::Moduli;
    let curve = if needs_curve {
        let seq = ctx.cfg.sequence.lambda_sequence();
        match generate_curve(
            &ctx.resolver,
            &ctx.entry.operator,
            &ctx.base_point,
            &seq,
            ctx.cfg.sequence.n_max as usize,
        ) {
            Ok(c) => Some(c),
            Err(e) => {
                failures.push(format!("curve: {e}"));
                let _ = writeln!(summary, "curve: FAILED ({e})");
                None
            }
        }
    } else {
        None
    };

    if let Some(curve) = &curve {
        if command.includes(Command::Curve) {
            write_file(out_dir, "curve.csv", &curve_csv(&ctx, curve), &mut files)?;
            let worst = curve.residuals.iter().cloned().fold(0.0f64, f64::max);
            let _ = writeln!(summary, "curve: {} points, worst residual {}", curve.len(), num(worst));
        }
        if command.includes(Command::Metastab) {
            let before = failures.len();
            write_file(
                out_dir,
                "metastab.csv",
                &metastab_csv(&ctx, curve, &mut failures),
                &mut files,
            )?;
            let cells = ctx.cfg.epsilons.len() * ctx.cfg.counterfunctions.len();
            let _ = writeln!(
                summary,
                "metastab: {} cells, {} without a metastable index",
                cells,
                failures.len() - before
            );
        }
        if command.includes(Command::Audit) {
            let reports = collect_audits(&ctx, curve);
            write_file(out_dir, "audit.csv", &audit_csv(&reports), &mut files)?;
            let failed: Vec<&AuditReport> = reports.iter().filter(|r| !r.passed).collect();
            let skipped = reports.iter().filter(|r| r.is_inapplicable()).count();
            let _ = writeln!(
                summary,
                "audit: {} reports, {} failed, {} inapplicable",
                reports.len(),
                failed.len(),
                skipped
            );
            for r in failed {
                let _ = writeln!(summary, "  {r}");
                failures.push(r.name.clone());
            }
        }
    }

    let _ = writeln!(
        summary,
        "{}",
        if failures.is_empty() {
            "status: ok"
        } else {
            "status: FAILED"
        }
    );
    write_file(out_dir, "summary.txt", summary.as_bytes(), &mut files)?;
    Ok(RunOutcome {
        files,
        failures,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::validate;

    fn cfg(extra: &str, op: &str) -> ExperimentConfig {
        let text = format!(
            "samples = 200\nepsilons = [0.5]\ncounterfunctions = [\"const:1\"]\n{extra}\n[space]\np = 2\ndim = 2\n[operator]\nname = \"{op}\"\n[sequence]\nn_max = 60\n"
        );
        validate(&text).unwrap()
    }

    #[test]
    fn minimal_zero_operator_run() {
        let dir = tempfile::tempdir().unwrap();
        let out = run(Command::All, cfg("", "zero"), dir.path()).unwrap();
        assert_eq!(out.exit_code(), 0, "{}", out.summary);
        let meta = fs::read_to_string(dir.path().join("metastab.csv")).unwrap();
        assert!(meta.lines().nth(1).unwrap().starts_with("zero,2e0,5e-1,const:1,0,"));
        for f in ["moduli.csv", "curve.csv", "audit.csv", "summary.txt"] {
            assert!(dir.path().join(f).exists());
        }
    }

    #[test]
    fn moduli_only_writes_exact_column_for_rational_moduli() {
        let dir = tempfile::tempdir().unwrap();
        let c = validate("epsilons = [1]\n[space]\np = 2\ndim = 2\n[operator]\nname = \"zero\"\n[moduli]\nb = 1\neta = \"quadratic\"\ntau = \"identity\"\n").unwrap();
        let out = run(Command::Moduli, c, dir.path()).unwrap();
        assert_eq!(out.files.len(), 2);
        let text = fs::read_to_string(dir.path().join("moduli.csv")).unwrap();
        let omega = text.lines().find(|l| l.starts_with("omega_tau")).unwrap();
        assert!(omega.ends_with(",1/24,false"), "{omega}");
    }
}
