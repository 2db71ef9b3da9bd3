//! Batch front end: `qlocal <command> [flags]`.
//!
//! Input documents are JSON:
//!
//! ```json
//! {
//!   "n": 2, "q": 2,
//!   "geometry": {"type": "chain"},
//!   "hamiltonian": [{"sites": [0, 1], "pauli": "ZZ", "coeff": 1.0}],
//!   "state": {"type": "basis", "digits": [0, 0]},
//!   "sigma": {"type": "basis", "digits": [1, 1]},
//!   "params": {"k": 2}
//! }
//! ```
//!
//! Geometry types: `chain`, `ring`, `grid2d` (`rows`, `cols`) and `matrix`
//! (`dist`, `d`, optional `A`). State types: `product` (`factors`, each a
//! row-major list of `[re, im]` pairs), `basis` (`digits`), `maximally-mixed`,
//! `gibbs` (`beta`), `microcanonical` (`energy`, `delta`) and `explicit`
//! (`matrix`). The Gibbs and microcanonical states use `hamiltonian`.
//!
//! Floats are written with 17 significant digits; non-finite values become
//! `null`. Exit status: 0 success, 1 invalid input, 2 a verified bound failed.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::concentration::{
    mgf_bound_product, tail_bound_correlated, tail_bound_product, BoundReport, ProductMgf,
};
use crate::ensembles::{ensemble_experiment, ising_chain, EnsembleRow, ExperimentConfig};
use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::harness::{linspace, verify, VerifyConfig, VerifyRow, VerifySummary, CSV_HEADER};
use crate::observable::{parse_observable, LocalObservable, TermSpec};
use crate::states::{build_state, default_probes, estimate_correlation_length, CorrelationFit, StateSpec};
use crate::tensor::{c64, CMat, DenseOperator};
use crate::w1::{w1_primal, W1Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_VIOLATION: i32 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    W1,
    ConcBound,
    ConcVerify,
    CorrLength,
    Ensembles,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// Local norms, concentration bounds and the k-local W1 distance for small spin systems.
#[derive(Clone, Debug, Parser)]
#[command(name = "qlocal", version)]
pub struct RunConfig {
    #[arg(value_enum)]
    pub command: CommandKind,
    /// JSON system description.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Shell width; for `ensembles`, a fraction of the operator norm of H.
    #[arg(long)]
    pub delta: Option<f64>,
    /// `start:stop:steps`; for `conc-verify` the values are fractions of the local norm.
    #[arg(long = "a-grid")]
    pub a_grid: Option<String>,
    #[arg(long)]
    pub instances: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Slack allowed in verified tail inequalities.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(command: CommandKind) -> Self {
        Self {
            command,
            input: None,
            k: None,
            beta: None,
            delta: None,
            a_grid: None,
            instances: None,
            seed: None,
            tol: None,
            format: Format::Json,
            out: None,
        }
    }
}

/// Result of one run: exit status and the emitted document.
#[derive(Debug)]
pub struct Outcome {
    pub exit_code: i32,
    pub output: Vec<u8>,
    pub error: Option<String>,
}

/// Parses `args` (program name first), runs, writes the document to `--out`
/// or stdout and returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cfg = match RunConfig::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    let outcome = run(&cfg);
    if let Some(err) = &outcome.error {
        eprintln!("error: {err}");
    }
    if !outcome.output.is_empty() {
        let written = match &cfg.out {
            Some(path) => std::fs::write(path, &outcome.output),
            None => std::io::stdout().write_all(&outcome.output),
        };
        if let Err(e) = written {
            eprintln!("error: cannot write output: {e}");
            return EXIT_INVALID;
        }
    }
    outcome.exit_code
}

pub fn run(cfg: &RunConfig) -> Outcome {
    match dispatch(cfg) {
        Ok((output, passed)) => Outcome { exit_code: if passed { EXIT_OK } else { EXIT_VIOLATION }, output, error: None },
        Err(e) => Outcome { exit_code: EXIT_INVALID, output: Vec::new(), error: Some(e.to_string()) },
    }
}

fn dispatch(cfg: &RunConfig) -> Result<(Vec<u8>, bool)> {
    match cfg.command {
        CommandKind::W1 => cmd_w1(cfg),
        CommandKind::ConcBound => cmd_conc_bound(cfg),
        CommandKind::ConcVerify => cmd_conc_verify(cfg),
        CommandKind::CorrLength => cmd_corr_length(cfg),
        CommandKind::Ensembles => cmd_ensembles(cfg),
    }
}

// ---------------------------------------------------------------------------
// input schema

#[derive(Debug, Deserialize)]
struct InputDoc {
    n: usize,
    q: usize,
    geometry: GeometrySpec,
    #[serde(default)]
    hamiltonian: Vec<Value>,
    #[serde(default)]
    state: Option<StateDoc>,
    #[serde(default)]
    sigma: Option<StateDoc>,
    #[serde(default)]
    params: BTreeMap<String, Value>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
enum GeometrySpec {
    Chain,
    Ring,
    Grid2d { rows: usize, cols: usize },
    Matrix { dist: Vec<Vec<f64>>, d: f64, #[serde(rename = "A", default)] ball_a: Option<f64> },
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
enum StateDoc {
    Product { factors: Vec<Vec<[f64; 2]>> },
    Basis { digits: Vec<usize> },
    MaximallyMixed,
    Gibbs { beta: f64 },
    Microcanonical { energy: f64, delta: f64 },
    Explicit { matrix: Vec<[f64; 2]> },
}

struct System {
    n: usize,
    q: usize,
    geom: Geometry,
    h: LocalObservable,
    params: BTreeMap<String, Value>,
    state: Option<StateDoc>,
    sigma: Option<StateDoc>,
}

fn schema(field: &str, reason: impl Into<String>) -> Error {
    Error::Schema { field: field.to_string(), reason: reason.into() }
}

fn load(cfg: &RunConfig) -> Result<System> {
    let path = cfg.input.as_ref().ok_or_else(|| schema("--input", "this command needs an input document"))?;
    let text = std::fs::read_to_string(path)?;
    parse_system(&text)
}

fn parse_system(text: &str) -> Result<System> {
    let doc: InputDoc = serde_json::from_str(text).map_err(|e| schema(&field_of(&e), e.to_string()))?;
    let geom = match doc.geometry {
        GeometrySpec::Chain => Geometry::chain(doc.n, doc.q)?,
        GeometrySpec::Ring => Geometry::ring(doc.n, doc.q)?,
        GeometrySpec::Grid2d { rows, cols } => {
            if rows * cols != doc.n {
                return Err(schema("geometry", format!("{rows}x{cols} grid does not have n = {} sites", doc.n)));
            }
            Geometry::grid2d(rows, cols, doc.q)?
        }
        GeometrySpec::Matrix { dist, d, ball_a } => {
            if dist.len() != doc.n {
                return Err(schema("geometry.dist", format!("{} rows for n = {}", dist.len(), doc.n)));
            }
            Geometry::from_distances(doc.q, dist, d, ball_a)?
        }
    };
    let mut terms = Vec::with_capacity(doc.hamiltonian.len());
    for (index, v) in doc.hamiltonian.into_iter().enumerate() {
        let t: TermSpec = serde_json::from_value(v).map_err(|e| Error::Term { index, reason: e.to_string() })?;
        terms.push(t);
    }
    let h = parse_observable(doc.n, doc.q, &terms)?;
    Ok(System { n: doc.n, q: doc.q, geom, h, params: doc.params, state: doc.state, sigma: doc.sigma })
}

/// Best-effort name of the field a serde error refers to.
fn field_of(e: &serde_json::Error) -> String {
    let msg = e.to_string();
    msg.split('`').nth(1).map(str::to_string).unwrap_or_else(|| "document".to_string())
}

fn matrix_from_pairs(field: &str, pairs: &[[f64; 2]], dim: usize) -> Result<CMat> {
    if pairs.len() != dim * dim {
        return Err(schema(field, format!("{} entries, expected {}", pairs.len(), dim * dim)));
    }
    Ok(CMat::from_fn(dim, dim, |i, j| c64::new(pairs[i * dim + j][0], pairs[i * dim + j][1])))
}

fn build(sys: &System, doc: &StateDoc, field: &str) -> Result<DenseOperator> {
    let support: Vec<usize> = (0..sys.n).collect();
    let spec = match doc {
        StateDoc::Product { factors } => StateSpec::Product(
            factors
                .iter()
                .enumerate()
                .map(|(x, f)| DenseOperator::density(matrix_from_pairs(field, f, sys.q)?, vec![x], sys.q))
                .collect::<Result<_>>()?,
        ),
        StateDoc::Basis { digits } => {
            if digits.len() != sys.n || digits.iter().any(|&d| d >= sys.q) {
                return Err(schema(field, "digits must list one value below q per site"));
            }
            return DenseOperator::basis_state(digits, support, sys.q);
        }
        StateDoc::MaximallyMixed => return DenseOperator::maximally_mixed(support, sys.q),
        StateDoc::Gibbs { beta } => StateSpec::Gibbs { observable: sys.h.clone(), beta: *beta },
        StateDoc::Microcanonical { energy, delta } => {
            StateSpec::Microcanonical { observable: sys.h.clone(), energy: *energy, delta: *delta }
        }
        StateDoc::Explicit { matrix } => {
            let dim = crate::tensor::checked_pow(sys.q, sys.n)?;
            StateSpec::Explicit(DenseOperator::new(matrix_from_pairs(field, matrix, dim)?, support, sys.q)?)
        }
    };
    build_state(&spec, &sys.geom)
}

fn product_factors(sys: &System, doc: &StateDoc) -> Result<Option<Vec<DenseOperator>>> {
    Ok(match doc {
        StateDoc::Product { factors } => Some(
            factors
                .iter()
                .enumerate()
                .map(|(x, f)| DenseOperator::density(matrix_from_pairs("state.factors", f, sys.q)?, vec![x], sys.q))
                .collect::<Result<_>>()?,
        ),
        StateDoc::Basis { digits } => Some(
            digits.iter().enumerate().map(|(x, &d)| DenseOperator::basis_state(&[d], vec![x], sys.q)).collect::<Result<_>>()?,
        ),
        StateDoc::MaximallyMixed => {
            Some((0..sys.n).map(|x| DenseOperator::maximally_mixed(vec![x], sys.q)).collect::<Result<_>>()?)
        }
        _ => None,
    })
}

fn param_f64(sys: &System, name: &str) -> Result<Option<f64>> {
    match sys.params.get(name) {
        None => Ok(None),
        Some(v) => v.as_f64().map(Some).ok_or_else(|| schema(&format!("params.{name}"), "expected a number")),
    }
}

fn param_usize(sys: &System, name: &str) -> Result<Option<usize>> {
    match sys.params.get(name) {
        None => Ok(None),
        Some(v) => v
            .as_u64()
            .map(|x| Some(x as usize))
            .ok_or_else(|| schema(&format!("params.{name}"), "expected a nonnegative integer")),
    }
}

pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || schema("--a-grid", format!("`{spec}` is not start:stop:steps"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let start: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let stop: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let steps: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if steps == 0 || !(start > 0.0) || !(stop >= start) {
        return Err(schema("--a-grid", "need 0 < start <= stop and at least one step"));
    }
    Ok(linspace(start, stop, steps))
}

// ---------------------------------------------------------------------------
// output

/// serde_json formatter printing every float with 17 significant digits.
struct FixedFloats;

impl serde_json::ser::Formatter for FixedFloats {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        writer.write_all(fmt_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "null".to_string()
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, FixedFloats);
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(out)
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    command: CommandKind,
    passed: bool,
    result: &'a T,
}

fn emit<T: Serialize>(cfg: &RunConfig, passed: bool, result: &T, csv: impl FnOnce() -> Result<Vec<u8>>) -> Result<(Vec<u8>, bool)> {
    let bytes = match cfg.format {
        Format::Json => to_json(&Document { command: cfg.command, passed, result })?,
        Format::Csv => csv()?,
    };
    Ok((bytes, passed))
}

// ---------------------------------------------------------------------------
// commands

/// CSV columns of `w1`.
pub const W1_CSV: [&str; 7] = ["value", "lower_bound", "upper_bound", "k", "solver_status", "witness_value", "site_weights"];

fn cmd_w1(cfg: &RunConfig) -> Result<(Vec<u8>, bool)> {
    let sys = load(cfg)?;
    let rho = build(&sys, sys.state.as_ref().ok_or_else(|| schema("state", "missing"))?, "state")?;
    let sigma = build(&sys, sys.sigma.as_ref().ok_or_else(|| schema("sigma", "missing"))?, "sigma")?;
    let k = cfg.k.or(param_usize(&sys, "k")?).unwrap_or(1).min(sys.n);
    let r: W1Result = w1_primal(&rho, &sigma, k, &sys.geom)?;
    let passed = r.lower_bound <= r.value + 1e-8 && r.value <= r.upper_bound + 1e-8;
    emit(cfg, passed, &r, || {
        let weights = r.site_weights.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(" ");
        csv_bytes(
            &W1_CSV,
            [vec![
                fmt_f64(r.value),
                fmt_f64(r.lower_bound),
                fmt_f64(r.upper_bound),
                r.k.to_string(),
                serde_json::to_value(r.solver_status)?.as_str().unwrap_or_default().to_string(),
                fmt_f64(r.witness_value),
                weights,
            ]],
        )
    })
}

#[derive(Serialize)]
struct ConcBoundResult {
    n: usize,
    k: usize,
    local_norm: f64,
    a: Vec<f64>,
    product_optimal: Vec<BoundReport>,
    product_explicit: Vec<BoundReport>,
    correlated_optimal: Vec<BoundReport>,
    correlated_explicit: Vec<BoundReport>,
    mgf: Option<ProductMgf>,
    /// Set: the correlated bounds use ξ and C from the input, not a certificate.
    correlation_inputs_uncertified: bool,
}

/// CSV columns of `conc-bound`.
pub const CONC_BOUND_CSV: [&str; 5] = ["a", "product_optimal", "product_explicit", "correlated_optimal", "correlated_explicit"];

fn cmd_conc_bound(cfg: &RunConfig) -> Result<(Vec<u8>, bool)> {
    let sys = load(cfg)?;
    let k = sys.h.locality().max(1);
    let l = sys.h.local_norm();
    if l <= 0.0 {
        return Err(schema("hamiltonian", "observable has zero local norm"));
    }
    let a = match (&cfg.a_grid, param_f64(&sys, "a")?) {
        (Some(g), _) => parse_grid(g)?,
        (None, Some(a)) => vec![a],
        (None, None) => return Err(schema("params.a", "give params.a or --a-grid")),
    };
    let mut out = ConcBoundResult {
        n: sys.n,
        k,
        local_norm: l,
        a: a.clone(),
        product_optimal: Vec::new(),
        product_explicit: Vec::new(),
        correlated_optimal: Vec::new(),
        correlated_explicit: Vec::new(),
        mgf: None,
        correlation_inputs_uncertified: false,
    };
    let corr = match (param_f64(&sys, "xi")?, param_f64(&sys, "C")?) {
        (Some(xi), Some(c)) => Some((xi, c)),
        _ => None,
    };
    for &ai in &a {
        out.product_optimal.push(tail_bound_product(ai, sys.n, k, l, false)?);
        out.product_explicit.push(tail_bound_product(ai, sys.n, k, l, true)?);
        if let Some((xi, c)) = corr {
            let (ba, d) = (sys.geom.ball_a(), sys.geom.dim_d());
            out.correlated_optimal.push(tail_bound_correlated(ai, sys.n, k, l, ba, d, xi, c, false)?);
            out.correlated_explicit.push(tail_bound_correlated(ai, sys.n, k, l, ba, d, xi, c, true)?);
            out.correlation_inputs_uncertified = true;
        }
    }
    if let Some(doc) = &sys.state {
        if let Some(factors) = product_factors(&sys, doc)? {
            out.mgf = Some(mgf_bound_product(&sys.h, &factors)?);
        }
    }
    emit(cfg, true, &out, || {
        let pick = |v: &Vec<BoundReport>, i: usize| v.get(i).map(|b| fmt_f64(b.bound_value)).unwrap_or_default();
        csv_bytes(
            &CONC_BOUND_CSV,
            (0..a.len()).map(|i| {
                vec![
                    fmt_f64(a[i]),
                    pick(&out.product_optimal, i),
                    pick(&out.product_explicit, i),
                    pick(&out.correlated_optimal, i),
                    pick(&out.correlated_explicit, i),
                ]
            }),
        )
    })
}

#[derive(Serialize)]
struct VerifyResult<'a> {
    summary: &'a VerifySummary,
    a_grid: &'a [f64],
    rows: &'a [VerifyRow],
}

fn verify_csv_row(r: &VerifyRow) -> Vec<String> {
    vec![
        r.instance.to_string(),
        r.n.to_string(),
        r.k_drawn.to_string(),
        r.k.to_string(),
        r.terms.to_string(),
        fmt_f64(r.local_norm),
        fmt_f64(r.expectation),
        fmt_f64(r.a),
        fmt_f64(r.threshold),
        fmt_f64(r.exact_tail),
        fmt_f64(r.bound_optimal),
        fmt_f64(r.bound_explicit),
        r.tail_ok.to_string(),
        fmt_f64(r.mgf_t),
        fmt_f64(r.log_exact_mgf),
        fmt_f64(r.log_mgf_termwise),
        fmt_f64(r.log_mgf_klocal),
        r.mgf_ok.to_string(),
        r.termwise_le_klocal.to_string(),
    ]
}

fn cmd_conc_verify(cfg: &RunConfig) -> Result<(Vec<u8>, bool)> {
    let mut vc = VerifyConfig::default();
    if let Some(path) = &cfg.input {
        // optional overrides from a document's params
        let text = std::fs::read_to_string(path)?;
        let v: Value = serde_json::from_str(&text).map_err(|e| schema(&field_of(&e), e.to_string()))?;
        if let Some(p) = v.get("params") {
            if let Some(x) = p.get("n_min").and_then(Value::as_u64) {
                vc.n_min = x as usize;
            }
            if let Some(x) = p.get("n_max").and_then(Value::as_u64) {
                vc.n_max = x as usize;
            }
        }
    }
    if let Some(s) = cfg.seed {
        vc.seed = s;
    }
    if let Some(i) = cfg.instances {
        vc.instances = i;
    }
    if let Some(g) = &cfg.a_grid {
        vc.a_grid = parse_grid(g)?;
    }
    if let Some(k) = cfg.k {
        vc.k_choices = vec![k];
    }
    if let Some(t) = cfg.tol {
        vc.tail_slack = t;
    }
    let (rows, summary) = verify(&vc)?;
    let passed = summary.passed();
    let result = VerifyResult { summary: &summary, a_grid: &vc.a_grid, rows: &rows };
    emit(cfg, passed, &result, || csv_bytes(&CSV_HEADER, rows.iter().map(verify_csv_row)))
}

/// CSV columns of `corr-length`.
pub const CORR_CSV: [&str; 2] = ["distance", "max_covariance"];

#[derive(Serialize)]
struct CorrResult<'a> {
    fit: &'a CorrelationFit,
    /// The prefactor is a least-squares estimate, not a certified bound.
    c_is_estimate: bool,
}

fn cmd_corr_length(cfg: &RunConfig) -> Result<(Vec<u8>, bool)> {
    let sys = load(cfg)?;
    let rho = build(&sys, sys.state.as_ref().ok_or_else(|| schema("state", "missing"))?, "state")?;
    let fit = estimate_correlation_length(&rho, &sys.geom, &default_probes(sys.q))?;
    emit(cfg, true, &CorrResult { fit: &fit, c_is_estimate: true }, || {
        csv_bytes(&CORR_CSV, fit.samples.iter().map(|&(d, c)| vec![fmt_f64(d), fmt_f64(c)]))
    })
}

/// CSV columns of `ensembles`.
pub const ENSEMBLE_CSV: [&str; 14] = [
    "n",
    "beta",
    "delta",
    "operator_norm",
    "local_norm",
    "e_star",
    "shell_dimension",
    "relative",
    "relative_bound",
    "relative_ok",
    "measured_lb",
    "w",
    "xi",
    "C",
];

#[derive(Serialize)]
struct EnsembleResult<'a> {
    coupling: f64,
    field: f64,
    k: usize,
    /// `c` in the transportation-cost inequality is taken as `ln(C + 1)`.
    c_is_ln_c_plus_one: bool,
    rows: &'a [EnsembleRow],
}

fn cmd_ensembles(cfg: &RunConfig) -> Result<(Vec<u8>, bool)> {
    let mut coupling = 1.0;
    let mut field = 1.0;
    let mut n_values = vec![4, 6, 8, 10];
    if let Some(path) = &cfg.input {
        let text = std::fs::read_to_string(path)?;
        let v: Value = serde_json::from_str(&text).map_err(|e| schema(&field_of(&e), e.to_string()))?;
        let p = v.get("params").cloned().unwrap_or(Value::Null);
        if let Some(x) = p.get("coupling") {
            coupling = x.as_f64().ok_or_else(|| schema("params.coupling", "expected a number"))?;
        }
        if let Some(x) = p.get("field") {
            field = x.as_f64().ok_or_else(|| schema("params.field", "expected a number"))?;
        }
        if let Some(x) = p.get("n_values") {
            n_values = serde_json::from_value(x.clone()).map_err(|e| schema("params.n_values", e.to_string()))?;
        }
    }
    let beta = cfg.beta.unwrap_or(0.5);
    let fraction = cfg.delta.unwrap_or(0.25);
    if !(fraction > 0.0) {
        return Err(schema("--delta", "must be positive"));
    }
    let k = cfg.k.unwrap_or(2);
    let family = move |n: usize| ising_chain(n, coupling, field);
    let rule = move |_: usize, norm: f64| fraction * norm;
    let rows = ensemble_experiment(&ExperimentConfig { family: &family, beta, delta_rule: &rule, n_values: &n_values, k })?;
    let passed = rows.iter().all(|r| r.relative_ok && r.data_processing_ok && r.width_ok);
    let result = EnsembleResult { coupling, field, k, c_is_ln_c_plus_one: true, rows: &rows };
    emit(cfg, passed, &result, || {
        csv_bytes(
            &ENSEMBLE_CSV,
            rows.iter().map(|r| {
                vec![
                    r.n.to_string(),
                    fmt_f64(r.beta),
                    fmt_f64(r.delta),
                    fmt_f64(r.operator_norm),
                    fmt_f64(r.local_norm),
                    fmt_f64(r.e_star),
                    r.shell_dimension.to_string(),
                    fmt_f64(r.relative),
                    fmt_f64(r.relative_bound),
                    r.relative_ok.to_string(),
                    fmt_f64(r.entropy.measured_lb),
                    fmt_f64(r.w),
                    r.correlation.as_ref().map(|c| fmt_f64(c.xi)).unwrap_or_default(),
                    r.correlation.as_ref().map(|c| fmt_f64(c.c)).unwrap_or_default(),
                ]
            }),
        )
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_have_seventeen_digits() {
        assert_eq!(fmt_f64(2.0), "2.0000000000000000e0");
        assert_eq!(fmt_f64(f64::INFINITY), "null");
        let bytes = to_json(&vec![0.1, f64::NAN]).unwrap();
        assert_eq!(String::from_utf8(bytes).unwrap(), "[1.0000000000000001e-1,null]\n");
        let back: Vec<Option<f64>> = serde_json::from_slice(&to_json(&vec![0.1, 1e300]).unwrap()).unwrap();
        assert_eq!(back, vec![Some(0.1), Some(1e300)]);
    }

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("0.1:0.3:3").unwrap().len(), 3);
        assert!(parse_grid("0.1:0.3").is_err());
        assert!(parse_grid("0:1:3").is_err());
        assert!(parse_grid("a:b:c").is_err());
    }

    #[test]
    fn schema_errors_name_fields() {
        let err = parse_system(r#"{"q": 2, "geometry": {"type": "chain"}}"#).err().unwrap();
        assert!(err.to_string().contains("`n`"), "{err}");
        let err = parse_system(
            r#"{"n": 2, "q": 2, "geometry": {"type": "chain"}, "hamiltonian": [{"sites": [0], "pauli": "Z"}, {"sites": [0], "pauli": "Q"}]}"#,
        )
        .err()
        .unwrap();
        assert!(matches!(err, Error::UnknownPauli('Q')), "{err}");
        let err = parse_system(
            r#"{"n": 2, "q": 2, "geometry": {"type": "chain"}, "hamiltonian": [{"sites": [0], "pauli": "Z"}, {"site": [0]}]}"#,
        )
        .err()
        .unwrap();
        assert!(matches!(err, Error::Term { index: 1, .. }), "{err}");
    }
}
