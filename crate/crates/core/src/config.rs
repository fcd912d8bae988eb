//! Experiment configuration: TOML text in, validated `ExperimentConfig` out.
//!
//! ```toml
//! seed = 7
//! samples = 2000
//! epsilons = [0.5, 0.1]
//! counterfunctions = ["const:1", "identity", "affine:2:3"]
//! # base_point = [0.8, -0.4]   (defaults to the operator's base point)
//!
//! [space]
//! p = 2.0
//! dim = 2
//!
//! [operator]
//! name = "rotation"
//!
//! [sequence]
//! kind = "lambda"            # or "t"
//! formula = "n_plus_1"       # t: "one_minus_inv_n_plus_2"
//! n_max = 400
//!
//! [moduli]
//! b = 4                      # defaults to the domain's diameter bound
//! eta = "lp"                 # or "quadratic" (p = 2)
//! tau = "lp"                 # or "identity" (p = 2)
//! p_fn = "eps2_over_96"      # or "identity"
//! s_fn = "identity"          # or "double"
//!
//! [tolerances]
//! resolvent = 1e-10
//! audit = 1e-8
//! lambda_tail = 1e4
//! ```

use std::fmt;

use toml::{Table, Value};

use crate::metastability::Counterfunction;
use crate::moduli::{identity_p_fn, placeholder_p_fn, LambdaSequence, ModuliChain, SequenceModuli, TSequence};
use crate::scalar::{IndexFn, ScalarFn};
use crate::space::{lp_convexity_modulus, lp_smoothness_modulus, ConvexityModulus, LpSpace, SmoothnessModulus};
use crate::zoo;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SequenceKind {
    Lambda,
    T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceConfig {
    pub kind: SequenceKind,
    pub formula: String,
    /// Curve length.
    pub n_max: u64,
}

impl SequenceConfig {
    pub fn lambda_sequence(&self) -> LambdaSequence {
        match self.kind {
            SequenceKind::Lambda => LambdaSequence::n_plus_one(),
            SequenceKind::T => LambdaSequence::from_t(&TSequence::one_minus_inv_n_plus_2()),
        }
    }

    /// Rate and bound moduli for the λ-sequence.
    pub fn lambda_moduli(&self) -> SequenceModuli {
        match self.kind {
            SequenceKind::Lambda => SequenceModuli::for_n_plus_one(),
            SequenceKind::T => SequenceModuli::for_default_t().transferred_from_t(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModuliConfig {
    pub b: Option<u32>,
    pub eta: String,
    pub tau: String,
    pub p_fn: String,
    pub s_fn: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tolerances {
    pub resolvent: f64,
    pub audit: f64,
    pub lambda_tail: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            resolvent: 1e-10,
            audit: 1e-8,
            lambda_tail: 1e4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub p: f64,
    pub dim: usize,
    pub operator: String,
    pub base_point: Option<Vec<f64>>,
    pub sequence: SequenceConfig,
    pub moduli: ModuliConfig,
    pub epsilons: Vec<f64>,
    pub counterfunctions: Vec<Counterfunction>,
    pub tolerances: Tolerances,
    pub seed: u64,
    pub samples: usize,
}

pub const DEFAULT_SEED: u64 = 7;
pub const DEFAULT_SAMPLES: usize = 2000;
pub const DEFAULT_N_MAX: u64 = 400;

const ETA_LABELS: [&str; 2] = ["lp", "quadratic"];
const TAU_LABELS: [&str; 2] = ["lp", "identity"];
const P_FN_LABELS: [&str; 2] = ["eps2_over_96", "identity"];
const S_FN_LABELS: [&str; 2] = ["identity", "double"];

/// A validation problem with the field it concerns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.field.is_empty() {
            f.write_str(&self.message)
        } else {
            write!(f, "{}: {}", self.field, self.message)
        }
    }
}

struct Errors(Vec<ConfigError>);

impl Errors {
    fn push(&mut self, field: &str, message: impl Into<String>) {
        self.0.push(ConfigError {
            field: field.to_string(),
            message: message.into(),
        });
    }
}

fn as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Float(f) => Some(*f),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn section<'a>(root: &'a Table, name: &str, errs: &mut Errors, required: bool) -> Option<&'a Table> {
    match root.get(name) {
        Some(Value::Table(t)) => Some(t),
        Some(_) => {
            errs.push(name, "must be a section");
            None
        }
        None => {
            if required {
                errs.push("", format!("{name} section required"));
            }
            None
        }
    }
}

fn get_f64(t: &Table, path: &str, key: &str, errs: &mut Errors) -> Option<f64> {
    let v = t.get(key)?;
    let out = as_f64(v);
    if out.is_none() {
        errs.push(&format!("{path}{key}"), "must be a number");
    }
    out
}

fn get_uint(t: &Table, path: &str, key: &str, errs: &mut Errors) -> Option<u64> {
    match t.get(key)? {
        Value::Integer(i) if *i >= 0 => Some(*i as u64),
        _ => {
            errs.push(&format!("{path}{key}"), "must be a non-negative integer");
            None
        }
    }
}

fn get_str<'a>(t: &'a Table, path: &str, key: &str, errs: &mut Errors) -> Option<&'a str> {
    match t.get(key)? {
        Value::String(s) => Some(s),
        _ => {
            errs.push(&format!("{path}{key}"), "must be a string");
            None
        }
    }
}

fn choice(t: &Table, path: &str, key: &str, allowed: &[&str], default: &str, errs: &mut Errors) -> String {
    match get_str(t, path, key, errs) {
        None => default.to_string(),
        Some(s) if allowed.contains(&s) => s.to_string(),
        Some(s) => {
            errs.push(
                &format!("{path}{key}"),
                format!("unknown value `{s}` (expected one of: {})", allowed.join(", ")),
            );
            default.to_string()
        }
    }
}

fn float_list(root: &Table, key: &str, errs: &mut Errors) -> Option<Vec<f64>> {
    match root.get(key)? {
        Value::Array(items) => {
            let vals: Vec<Option<f64>> = items.iter().map(as_f64).collect();
            if vals.iter().any(Option::is_none) {
                errs.push(key, "must be a list of numbers");
                return None;
            }
            Some(vals.into_iter().flatten().collect())
        }
        _ => {
            errs.push(key, "must be a list of numbers");
            None
        }
    }
}

fn unknown_keys(t: &Table, path: &str, allowed: &[&str], errs: &mut Errors) {
    for k in t.keys() {
        if !allowed.contains(&k.as_str()) {
            errs.push(&format!("{path}{k}"), "unknown key");
        }
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Parses and validates config text, collecting every problem found.
pub fn validate(text: &str) -> Result<ExperimentConfig, Vec<ConfigError>> {
    let root: Table = match text.parse::<Table>() {
        Ok(t) => t,
        Err(e) => {
            let field = e
                .span()
                .map(|s| format!("line {}", line_of(text, s.start)))
                .unwrap_or_default();
            return Err(vec![ConfigError {
                field,
                message: e.message().to_string(),
            }]);
        }
    };
    let mut errs = Errors(Vec::new());
    unknown_keys(
        &root,
        "",
        &[
            "seed",
            "samples",
            "epsilons",
            "counterfunctions",
            "base_point",
            "space",
            "operator",
            "sequence",
            "moduli",
            "tolerances",
        ],
        &mut errs,
    );

    let mut p = 2.0;
    let mut dim = 1usize;
    if let Some(space) = section(&root, "space", &mut errs, true) {
        unknown_keys(space, "space.", &["p", "dim"], &mut errs);
        match get_f64(space, "space.", "p", &mut errs) {
            Some(v) if v.is_finite() && v > 1.0 => p = v,
            Some(v) => errs.push("space.p", format!("p must exceed 1 (got {v})")),
            None if !space.contains_key("p") => errs.push("space.p", "required"),
            None => {}
        }
        match get_uint(space, "space.", "dim", &mut errs) {
            Some(d) if d >= 1 => dim = d as usize,
            Some(_) => errs.push("space.dim", "must be at least 1"),
            None if !space.contains_key("dim") => errs.push("space.dim", "required"),
            None => {}
        }
    }

    let mut operator = String::new();
    if let Some(op) = section(&root, "operator", &mut errs, true) {
        unknown_keys(op, "operator.", &["name"], &mut errs);
        match get_str(op, "operator.", "name", &mut errs) {
            Some(name) if zoo::is_known(name) => operator = name.to_string(),
            Some(name) => errs.push(
                "operator.name",
                format!("unknown operator `{name}` (known: {})", zoo::NAMES.join(", ")),
            ),
            None if !op.contains_key("name") => errs.push("operator.name", "required"),
            None => {}
        }
    }

    let base_point = float_list(&root, "base_point", &mut errs);
    if let Some(bp) = &base_point {
        if bp.len() != dim {
            errs.push(
                "base_point",
                format!("has {} coordinates, space dimension is {dim}", bp.len()),
            );
        } else if bp.iter().any(|c| !c.is_finite()) {
            errs.push("base_point", "coordinates must be finite");
        }
    }

    let mut sequence = SequenceConfig {
        kind: SequenceKind::Lambda,
        formula: "n_plus_1".into(),
        n_max: DEFAULT_N_MAX,
    };
    if let Some(seq) = section(&root, "sequence", &mut errs, false) {
        unknown_keys(seq, "sequence.", &["kind", "formula", "n_max"], &mut errs);
        let kind = choice(seq, "sequence.", "kind", &["lambda", "t"], "lambda", &mut errs);
        sequence.kind = if kind == "t" {
            SequenceKind::T
        } else {
            SequenceKind::Lambda
        };
        let expected = match sequence.kind {
            SequenceKind::Lambda => "n_plus_1",
            SequenceKind::T => "one_minus_inv_n_plus_2",
        };
        sequence.formula = choice(seq, "sequence.", "formula", &[expected], expected, &mut errs);
        match get_uint(seq, "sequence.", "n_max", &mut errs) {
            Some(n) if n >= 1 => sequence.n_max = n,
            Some(_) => errs.push("sequence.n_max", "must be at least 1"),
            None => {}
        }
    }

    let mut moduli = ModuliConfig {
        b: None,
        eta: "lp".into(),
        tau: "lp".into(),
        p_fn: "eps2_over_96".into(),
        s_fn: "identity".into(),
    };
    if let Some(m) = section(&root, "moduli", &mut errs, false) {
        unknown_keys(m, "moduli.", &["b", "eta", "tau", "p_fn", "s_fn"], &mut errs);
        match get_uint(m, "moduli.", "b", &mut errs) {
            Some(b) if b >= 1 && b <= u32::MAX as u64 => moduli.b = Some(b as u32),
            Some(_) => errs.push("moduli.b", "must be an integer >= 1"),
            None => {}
        }
        moduli.eta = choice(m, "moduli.", "eta", &ETA_LABELS, "lp", &mut errs);
        moduli.tau = choice(m, "moduli.", "tau", &TAU_LABELS, "lp", &mut errs);
        moduli.p_fn = choice(m, "moduli.", "p_fn", &P_FN_LABELS, "eps2_over_96", &mut errs);
        moduli.s_fn = choice(m, "moduli.", "s_fn", &S_FN_LABELS, "identity", &mut errs);
        if p != 2.0 && moduli.eta == "quadratic" {
            errs.push("moduli.eta", "`quadratic` is a convexity modulus only for p = 2");
        }
        if p != 2.0 && moduli.tau == "identity" {
            errs.push("moduli.tau", "`identity` is a smoothness modulus only for p = 2");
        }
    }

    let epsilons = float_list(&root, "epsilons", &mut errs).unwrap_or_else(|| vec![0.5, 0.1]);
    if epsilons.is_empty() {
        errs.push("epsilons", "must not be empty");
    }
    if epsilons.iter().any(|e| !(e.is_finite() && *e > 0.0 && *e <= 2.0)) {
        errs.push("epsilons", "every epsilon must lie in (0, 2]");
    }

    let counterfunctions = match root.get("counterfunctions") {
        None => vec![
            Counterfunction::Constant(1),
            Counterfunction::Identity,
            Counterfunction::Affine { slope: 2, offset: 3 },
        ],
        Some(Value::Array(items)) => {
            let mut out = Vec::new();
            for (i, item) in items.iter().enumerate() {
                match item.as_str().map(str::parse::<Counterfunction>) {
                    Some(Ok(g)) => out.push(g),
                    _ => errs.push(
                        &format!("counterfunctions[{i}]"),
                        "expected `const:c`, `identity`, `affine:a:b` or `table:v0,v1,...`",
                    ),
                }
            }
            if items.is_empty() {
                errs.push("counterfunctions", "must not be empty");
            }
            out
        }
        Some(_) => {
            errs.push("counterfunctions", "must be a list of strings");
            Vec::new()
        }
    };

    let mut tolerances = Tolerances::default();
    if let Some(t) = section(&root, "tolerances", &mut errs, false) {
        unknown_keys(t, "tolerances.", &["resolvent", "audit", "lambda_tail"], &mut errs);
        for (key, slot) in [
            ("resolvent", &mut tolerances.resolvent),
            ("audit", &mut tolerances.audit),
            ("lambda_tail", &mut tolerances.lambda_tail),
        ] {
            match get_f64(t, "tolerances.", key, &mut errs) {
                Some(v) if v.is_finite() && v > 0.0 => *slot = v,
                Some(_) => errs.push(&format!("tolerances.{key}"), "must be positive and finite"),
                None => {}
            }
        }
    }

    let seed = get_uint(&root, "", "seed", &mut errs).unwrap_or(DEFAULT_SEED);
    let samples = match get_uint(&root, "", "samples", &mut errs) {
        Some(0) => {
            errs.push("samples", "must be at least 1");
            DEFAULT_SAMPLES
        }
        Some(n) => n as usize,
        None => DEFAULT_SAMPLES,
    };

    if errs.0.is_empty() && !operator.is_empty() {
        let space = LpSpace::new(p, dim).expect("validated");
        if let Err(e) = zoo::build(&operator, &space) {
            errs.push("operator.name", e.to_string());
        }
    }

    if !errs.0.is_empty() {
        return Err(errs.0);
    }
    Ok(ExperimentConfig {
        p,
        dim,
        operator,
        base_point,
        sequence,
        moduli,
        epsilons,
        counterfunctions,
        tolerances,
        seed,
        samples,
    })
}

impl ExperimentConfig {
    pub fn space(&self) -> LpSpace {
        LpSpace::new(self.p, self.dim).expect("validated exponent and dimension")
    }

    pub fn convexity_modulus(&self) -> ConvexityModulus {
        match self.moduli.eta.as_str() {
            "quadratic" => ConvexityModulus::quadratic(),
            _ => lp_convexity_modulus(&self.space()),
        }
    }

    pub fn smoothness_modulus(&self) -> SmoothnessModulus {
        match self.moduli.tau.as_str() {
            "identity" => SmoothnessModulus::identity(),
            _ => lp_smoothness_modulus(&self.space()),
        }
    }

    pub fn p_fn(&self) -> ScalarFn {
        match self.moduli.p_fn.as_str() {
            "identity" => identity_p_fn(),
            _ => placeholder_p_fn(),
        }
    }

    pub fn s_fn(&self) -> IndexFn {
        match self.moduli.s_fn.as_str() {
            "double" => IndexFn::new("double", |n| 2 * n),
            _ => IndexFn::identity(),
        }
    }

    /// The moduli chain with diameter bound `b`.
    pub fn chain(&self, b: u32) -> ModuliChain {
        ModuliChain::new(b, self.convexity_modulus(), self.smoothness_modulus())
            .expect("b >= 1")
            .with_p_fn(self.p_fn())
            .with_s_fn(self.s_fn())
    }

    /// Canonical TOML text; `validate` of the output gives back `self`.
    pub fn to_config_string(&self) -> String {
        let mut root = Table::new();
        root.insert("seed".into(), Value::Integer(self.seed as i64));
        root.insert("samples".into(), Value::Integer(self.samples as i64));
        root.insert(
            "epsilons".into(),
            Value::Array(self.epsilons.iter().map(|e| Value::Float(*e)).collect()),
        );
        root.insert(
            "counterfunctions".into(),
            Value::Array(self.counterfunctions.iter().map(|g| Value::String(g.label())).collect()),
        );
        if let Some(bp) = &self.base_point {
            root.insert(
                "base_point".into(),
                Value::Array(bp.iter().map(|c| Value::Float(*c)).collect()),
            );
        }
        let mut space = Table::new();
        space.insert("p".into(), Value::Float(self.p));
        space.insert("dim".into(), Value::Integer(self.dim as i64));
        root.insert("space".into(), Value::Table(space));
        let mut op = Table::new();
        op.insert("name".into(), Value::String(self.operator.clone()));
        root.insert("operator".into(), Value::Table(op));
        let mut seq = Table::new();
        let kind = match self.sequence.kind {
            SequenceKind::Lambda => "lambda",
            SequenceKind::T => "t",
        };
        seq.insert("kind".into(), Value::String(kind.into()));
        seq.insert("formula".into(), Value::String(self.sequence.formula.clone()));
        seq.insert("n_max".into(), Value::Integer(self.sequence.n_max as i64));
        root.insert("sequence".into(), Value::Table(seq));
        let mut m = Table::new();
        if let Some(b) = self.moduli.b {
            m.insert("b".into(), Value::Integer(b as i64));
        }
        m.insert("eta".into(), Value::String(self.moduli.eta.clone()));
        m.insert("tau".into(), Value::String(self.moduli.tau.clone()));
        m.insert("p_fn".into(), Value::String(self.moduli.p_fn.clone()));
        m.insert("s_fn".into(), Value::String(self.moduli.s_fn.clone()));
        root.insert("moduli".into(), Value::Table(m));
        let mut t = Table::new();
        t.insert("resolvent".into(), Value::Float(self.tolerances.resolvent));
        t.insert("audit".into(), Value::Float(self.tolerances.audit));
        t.insert("lambda_tail".into(), Value::Float(self.tolerances.lambda_tail));
        root.insert("tolerances".into(), Value::Table(t));
        toml::to_string(&root).expect("tables always serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str =
        "epsilons = [0.1]\ncounterfunctions = [\"const:1\"]\n[space]\np = 2\ndim = 2\n[operator]\nname = \"zero\"\n";

    fn messages(text: &str) -> Vec<String> {
        validate(text).unwrap_err().iter().map(ToString::to_string).collect()
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let c = validate(MINIMAL).unwrap();
        assert_eq!(c.p, 2.0);
        assert_eq!(c.operator, "zero");
        assert_eq!(c.sequence.n_max, DEFAULT_N_MAX);
        assert_eq!(c.counterfunctions, vec![Counterfunction::Constant(1)]);
        assert_eq!(c.tolerances, Tolerances::default());
    }

    #[test]
    fn empty_text_needs_space_section() {
        let errs = messages("");
        assert!(errs.iter().any(|e| e == "space section required"), "{errs:?}");
    }

    #[test]
    fn p_one_rejected() {
        let errs = messages(&MINIMAL.replace("p = 2", "p = 1"));
        assert!(errs.iter().any(|e| e.contains("p must exceed 1")), "{errs:?}");
    }

    #[test]
    fn unknown_operator_lists_zoo() {
        let errs = messages(&MINIMAL.replace("\"zero\"", "\"bogus\""));
        assert!(errs
            .iter()
            .any(|e| e.contains("bogus") && e.contains("rotation") && e.contains("clip_contraction")));
    }

    #[test]
    fn errors_accumulate() {
        let text = "samples = -3\nepsilons = [0.1, 5]\n[space]\np = 0.5\ndim = 0\n[operator]\nname = 3\n[moduli]\neta = \"nope\"\n";
        let errs = messages(text);
        assert!(errs.len() >= 5, "{errs:?}");
    }

    #[test]
    fn syntax_error_reports_line() {
        let errs = messages("[space]\np = 2\ndim = = 3\n");
        assert!(errs[0].starts_with("line 3"), "{errs:?}");
    }

    #[test]
    fn p2_only_moduli_rejected_elsewhere() {
        let text = MINIMAL.replace("p = 2", "p = 3") + "[moduli]\neta = \"quadratic\"\n";
        assert!(messages(&text).iter().any(|e| e.starts_with("moduli.eta")));
    }

    #[test]
    fn round_trip() {
        let text = "seed = 11\nsamples = 300\nepsilons = [0.5, 0.01]\ncounterfunctions = [\"identity\", \"affine:2:3\", \"table:1,0,4\"]\nbase_point = [0.25, -1.5, 0.1]\n\
                    [space]\np = 1.5\ndim = 3\n[operator]\nname = \"diag_cubic\"\n[sequence]\nkind = \"t\"\nformula = \"one_minus_inv_n_plus_2\"\nn_max = 50\n\
                    [moduli]\nb = 4\ns_fn = \"double\"\np_fn = \"identity\"\n[tolerances]\nresolvent = 1e-11\naudit = 1e-7\nlambda_tail = 1e5\n";
        let c = validate(text).unwrap();
        let again = validate(&c.to_config_string()).unwrap();
        assert_eq!(c, again);
        assert_eq!(again.to_config_string(), c.to_config_string());
    }

    #[test]
    fn garbage_never_panics() {
        for text in [
            "\u{0}",
            "[[space]]",
            "space = 3",
            "[space]\np = \"x\"",
            "epsilons = \"a\"\n[space]\np=2\ndim=1",
        ] {
            assert!(validate(text).is_err());
        }
    }
}
