//! Command-line front end: argument parsing, run configuration and report
//! emission as JSON lines or CSV with decimal strings.

use clap::{Args, Parser, Subcommand};
use rug::Float;
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::biorthogonal::{dual_family_auto, norm_growth_check, FamilyReport, NormGrowthReport};
use crate::completeness::{hereditary_sweep, singular_threshold, PartitionSelection, SweepRow};
use crate::error::{MuntzError, Result};
use crate::exponents::{generate_exponents, ExponentKind, ExponentSequence, DEFAULT_MIN_GAP};
use crate::gram::{cauchy_determinant, cauchy_inverse_auto, distances, inverse_tolerance, DistanceReport};
use crate::hardy::{attach_radial, closure_membership_via_frame, h2_membership, FrameOptions, HardyReport, Membership, RadialBound};
use crate::muntz_space::{
    evaluate, project, recover_coefficients, BlackBox, Function, MuntzSeries, Projection, Recovery, SlitDiskPoint,
    DEFAULT_TERM_BUDGET,
};
use crate::numeric::{check_precision, default_precision, scaled_tolerance, to_decimal, CFloat};
use crate::operators::{
    default_selection, dilation_operator, synthesis_certificate, CertificateTolerances, MuntzOperator,
    SynthesisCertificate,
};
use crate::quadrature::QuadratureSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
}

impl OutputFormat {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            other => Err(MuntzError::Parameter(format!("unknown output format '{other}'"))),
        }
    }
}

/// Settings shared by every subcommand; embedded in every report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub precision_bits: u32,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    pub output_format: OutputFormat,
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    pub fn new(precision_bits: u32) -> Self {
        RunConfig {
            precision_bits,
            tolerances: BTreeMap::new(),
            output_format: OutputFormat::Json,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_precision(self.precision_bits)?;
        for (k, v) in &self.tolerances {
            if !(*v > 0.0) || !v.is_finite() {
                return Err(MuntzError::Parameter(format!("tolerance '{k}' must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Named tolerance, recording the default in the config when absent.
    pub fn tolerance(&mut self, name: &str, default: f64) -> f64 {
        *self.tolerances.entry(name.to_string()).or_insert(default)
    }

    fn quadrature(&mut self) -> QuadratureSpec {
        let bits = self.precision_bits;
        QuadratureSpec::for_precision(bits).with_tolerance(self.tolerance("quadrature", scaled_tolerance(bits, 8)))
    }
}

/// What is written to disk: the report with the command and configuration
/// that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Artifact<T> {
    pub command: String,
    pub config: RunConfig,
    pub report: T,
}

/// A report that can be written as JSON lines or as CSV.
pub trait Report: Serialize {
    /// Items written one per JSON line; a single item by default.
    fn json_items(&self) -> Vec<Value> {
        vec![serde_json::to_value(self).expect("report serializes")]
    }
    fn csv_header(&self) -> Vec<String>;
    fn csv_rows(&self) -> Vec<Vec<String>>;
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> MuntzError {
    MuntzError::Io { path: path.display().to_string(), message: e.to_string() }
}

/// Write `report` to `path` (`-` for stdout). CSV output starts with a
/// `# config: {...}` comment line carrying the artifact header.
pub fn emit_report<R: Report>(report: &R, command: &str, config: &RunConfig, path: &Path) -> Result<()> {
    let mut buf: Vec<u8> = Vec::new();
    match config.output_format {
        OutputFormat::Json => {
            for item in report.json_items() {
                let art = Artifact { command: command.to_string(), config: config.clone(), report: item };
                serde_json::to_writer(&mut buf, &art).map_err(|e| io_err(path, e))?;
                buf.push(b'\n');
            }
        }
        OutputFormat::Csv => {
            let header = Artifact { command: command.to_string(), config: config.clone(), report: () };
            let line = serde_json::to_string(&header).map_err(|e| io_err(path, e))?;
            buf.extend_from_slice(format!("# config: {line}\n").as_bytes());
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(report.csv_header()).map_err(|e| io_err(path, e))?;
            for row in report.csv_rows() {
                w.write_record(row).map_err(|e| io_err(path, e))?;
            }
            w.flush().map_err(|e| io_err(path, e))?;
        }
    }
    if path.as_os_str() == "-" {
        std::io::stdout().write_all(&buf).map_err(|e| io_err(path, e))
    } else {
        std::fs::write(path, buf).map_err(|e| io_err(path, e))
    }
}

/// Parse JSON-lines output back into artifacts.
pub fn read_artifacts<T: DeserializeOwned>(text: &str) -> Result<Vec<Artifact<T>>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| MuntzError::Format(e.to_string())))
        .collect()
}

/// Parse CSV output: the configuration header and the data records.
pub fn read_csv(text: &str) -> Result<(Artifact<()>, Vec<csv::StringRecord>)> {
    let first = text.lines().next().unwrap_or_default();
    let json = first
        .strip_prefix("# config: ")
        .ok_or_else(|| MuntzError::Format("CSV output lacks the config line".into()))?;
    let header: Artifact<()> = serde_json::from_str(json).map_err(|e| MuntzError::Format(e.to_string()))?;
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let rows = r.records().collect::<std::result::Result<Vec<_>, _>>().map_err(|e| MuntzError::Format(e.to_string()))?;
    Ok((header, rows))
}

fn dec(x: &Float) -> String {
    to_decimal(x)
}

impl Report for ExponentSequence {
    fn csv_header(&self) -> Vec<String> {
        vec!["n".into(), "lambda".into()]
    }
    fn csv_rows(&self) -> Vec<Vec<String>> {
        self.values().iter().enumerate().map(|(i, v)| vec![(i + 1).to_string(), v.to_string()]).collect()
    }
}

/// Gram matrix with its closed-form determinant and inverse residual.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GramReport {
    pub lambda: Vec<f64>,
    #[serde(rename = "N")]
    pub truncation: usize,
    pub precision_bits: u32,
    pub entries: Vec<Vec<String>>,
    pub determinant: String,
    pub inverse: Vec<Vec<String>>,
    pub inverse_residual: String,
}

impl Report for GramReport {
    fn csv_header(&self) -> Vec<String> {
        std::iter::once("row".to_string()).chain((1..=self.truncation).map(|k| format!("g_{k}"))).collect()
    }
    fn csv_rows(&self) -> Vec<Vec<String>> {
        self.entries
            .iter()
            .enumerate()
            .map(|(i, r)| std::iter::once((i + 1).to_string()).chain(r.iter().cloned()).collect())
            .collect()
    }
}

impl Report for Vec<DistanceReport> {
    fn json_items(&self) -> Vec<Value> {
        self.iter().map(|r| serde_json::to_value(r).expect("report serializes")).collect()
    }
    fn csv_header(&self) -> Vec<String> {
        ["n", "N", "distance", "dual_norm", "duality_defect"].map(String::from).to_vec()
    }
    fn csv_rows(&self) -> Vec<Vec<String>> {
        self.iter()
            .map(|r| {
                vec![r.n.to_string(), r.truncation.to_string(), dec(&r.distance), dec(&r.dual_norm), dec(&r.duality_defect)]
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiorthogonalReport {
    pub family: FamilyReport,
    #[serde(default)]
    pub norm_growth: Option<NormGrowthReport>,
}

impl Report for BiorthogonalReport {
    fn csv_header(&self) -> Vec<String> {
        let n = self.family.truncation;
        ["n", "norm", "distance"]
            .map(String::from)
            .into_iter()
            .chain((1..=n).map(|k| format!("coeff_{k}")))
            .collect()
    }
    fn csv_rows(&self) -> Vec<Vec<String>> {
        let f = &self.family;
        (0..f.truncation)
            .map(|i| {
                [(i + 1).to_string(), dec(&f.norms[i]), dec(&f.distances[i])]
                    .into_iter()
                    .chain(f.coefficients[i].iter().cloned())
                    .collect()
            })
            .collect()
    }
}

fn coefficient_rows(lambda: &[f64], coeffs: &[CFloat]) -> Vec<Vec<String>> {
    coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let l = lambda.get(i).map(|v| v.to_string()).unwrap_or_default();
            vec![(i + 1).to_string(), l, dec(&c.re), dec(&c.im)]
        })
        .collect()
}

const COEFF_HEADER: [&str; 4] = ["n", "lambda", "re", "im"];

impl Report for Projection {
    fn csv_header(&self) -> Vec<String> {
        COEFF_HEADER.map(String::from).to_vec()
    }
    fn csv_rows(&self) -> Vec<Vec<String>> {
        coefficient_rows(self.series.lambda.values(), &self.series.coeffs)
    }
}

/// Recovered coefficients together with the exponents they belong to.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub lambda: Vec<f64>,
    #[serde(flatten)]
    pub recovery: Recovery,
}

impl Report for RecoveryReport {
    fn csv_header(&self) -> Vec<String> {
        COEFF_HEADER.map(String::from).to_vec()
    }
    fn csv_rows(&self) -> Vec<Vec<String>> {
        coefficient_rows(&self.lambda, &self.recovery.coefficients)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub z: CFloat,
    pub value: CFloat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tolerance: f64,
    pub points: Vec<EvalPoint>,
}

impl Report for EvalReport {
    fn csv_header(&self) -> Vec<String> {
        ["z_re", "z_im", "re", "im"].map(String::from).to_vec()
    }
    fn csv_rows(&self) -> Vec<Vec<String>> {
        self.points
            .iter()
            .map(|p| vec![dec(&p.z.re), dec(&p.z.im), dec(&p.value.re), dec(&p.value.im)])
            .collect()
    }
}

impl Report for SynthesisCertificate {
    fn csv_header(&self) -> Vec<String> {
        ["item", "status", "value", "tolerance", "detail"].map(String::from).to_vec()
    }
    fn csv_rows(&self) -> Vec<Vec<String>> {
        [
            ("finite_rank", &self.finite_rank),
            ("eigen_relations", &self.eigen_relations),
            ("adjoint_relations", &self.adjoint_relations),
            ("kernel", &self.kernel),
            ("spectrum", &self.spectrum),
            ("simplicity", &self.simplicity),
            ("normality", &self.normality),
            ("mixed_system", &self.mixed_system),
        ]
        .into_iter()
        .map(|(name, it)| {
            let status = serde_json::to_value(it.status).expect("status serializes");
            vec![
                name.to_string(),
                status.as_str().unwrap_or_default().to_string(),
                dec(&it.value),
                it.tolerance.to_string(),
                it.detail.clone(),
            ]
        })
        .collect()
    }
}

impl Report for Vec<SweepRow> {
    fn json_items(&self) -> Vec<Value> {
        self.iter().map(|r| serde_json::to_value(r).expect("report serializes")).collect()
    }
    fn csv_header(&self) -> Vec<String> {
        ["mask", "dual_indices", "min_singular", "invertible", "residual"].map(String::from).to_vec()
    }
    fn csv_rows(&self) -> Vec<Vec<String>> {
        self.iter()
            .map(|r| {
                let n2: Vec<String> = r.partition.n2.iter().map(|k| k.to_string()).collect();
                vec![
                    r.mask.to_string(),
                    n2.join(" "),
                    dec(&r.min_singular),
                    r.invertible.to_string(),
                    r.residual.as_ref().map(dec).unwrap_or_default(),
                ]
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HardyRun {
    #[serde(flatten)]
    pub hardy: HardyReport,
    #[serde(default)]
    pub radial: Vec<RadialBound>,
}

impl Report for HardyRun {
    fn csv_header(&self) -> Vec<String> {
        ["K", "l2_coeff_sum", "residual"].map(String::from).to_vec()
    }
    fn csv_rows(&self) -> Vec<Vec<String>> {
        let h = &self.hardy;
        h.checkpoints
            .iter()
            .zip(&h.l2_coeff_sums)
            .map(|(k, s)| {
                let r = h.residuals.iter().find(|p| p.truncation == *k).map(|p| dec(&p.residual));
                vec![k.to_string(), dec(s), r.unwrap_or_default()]
            })
            .collect()
    }
}

#[derive(Parser, Debug)]
#[command(name = "muntz", version, about = "High-precision computations with Müntz systems in L²(0,1)")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalArgs {
    /// Working precision in bits; defaults to MUNTZ_PRECISION_BITS or 256.
    #[arg(long, global = true)]
    pub precision: Option<u32>,
    /// JSON file holding a RunConfig; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override a named tolerance, as name=value. Repeatable.
    #[arg(long = "tol", global = true, value_name = "NAME=VALUE")]
    pub tolerances: Vec<String>,
    /// json or csv; defaults by the output file extension.
    #[arg(long, global = true)]
    pub format: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output path; `-` writes to stdout.
    #[arg(long, short, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct LambdaArgs {
    /// Explicit exponents ("1,2", "{1,2}" or "1 2") or a JSON file.
    #[arg(long, num_args = 1.., allow_negative_numbers = true)]
    pub lambda: Vec<String>,
    /// Generator when --lambda is absent: power, lacunary or integers.
    #[arg(long, default_value = "power")]
    pub kind: String,
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    #[arg(long, default_value_t = 2.0)]
    pub q: f64,
    /// Truncation N.
    #[arg(long)]
    pub n: usize,
}

#[derive(Args, Debug, Clone)]
pub struct FunctionArgs {
    /// MuntzSeries JSON file.
    #[arg(long)]
    pub series: Option<PathBuf>,
    /// Finite series as "coeff@exponent" pairs, e.g. "3@4,-5@49".
    #[arg(long, allow_hyphen_values = true)]
    pub terms: Option<String>,
    /// The monomial t^mu.
    #[arg(long)]
    pub monomial: Option<f64>,
    /// Coefficient rule on the generated exponents: inv_n, inv_sqrt_n, power:s.
    #[arg(long)]
    pub rule: Option<String>,
    /// Treat the function as a black box and integrate numerically.
    #[arg(long)]
    pub quadrature: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate an exponent sequence.
    GenExponents {
        #[arg(long, default_value = "power")]
        kind: String,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, default_value_t = 2.0)]
        q: f64,
        #[arg(long)]
        n: usize,
    },
    /// Gram matrix, Cauchy determinant and inverse.
    Gram(LambdaArgs),
    /// Distances D_n from each monomial to the span of the others.
    Distance(LambdaArgs),
    /// Biorthogonal family and optional norm growth fit.
    Biorthogonal {
        #[command(flatten)]
        lambda: LambdaArgs,
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Orthogonal projection onto the truncated span.
    Project {
        #[command(flatten)]
        lambda: LambdaArgs,
        #[command(flatten)]
        function: FunctionArgs,
    },
    /// Coefficients <f, r_n> of a function.
    Recover {
        #[command(flatten)]
        lambda: LambdaArgs,
        #[command(flatten)]
        function: FunctionArgs,
    },
    /// Evaluate a series on the slit disk.
    Eval {
        #[command(flatten)]
        function: FunctionArgs,
        /// Generator for --rule series.
        #[arg(long, default_value = "power")]
        kind: String,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, default_value_t = 2.0)]
        q: f64,
        /// Points "re,im" (or "re"). Repeatable.
        #[arg(long, required = true, allow_hyphen_values = true)]
        z: Vec<String>,
    },
    /// Operator commands.
    Operator {
        #[command(subcommand)]
        action: OperatorCommand,
    },
    /// Invertibility of mixed systems over partitions.
    Hereditary {
        #[command(flatten)]
        lambda: LambdaArgs,
        /// all or sample:COUNT.
        #[arg(long, default_value = "all")]
        partitions: String,
        /// Target whose reconstruction residual is reported per partition.
        #[command(flatten)]
        function: FunctionArgs,
    },
    /// Membership in the Hardy space with gaps on Λ.
    Hardy {
        #[command(flatten)]
        lambda: LambdaArgs,
        #[command(flatten)]
        function: FunctionArgs,
        /// Term budget K.
        #[arg(long, default_value_t = DEFAULT_TERM_BUDGET)]
        budget: usize,
        /// Use the projection test on span{e_1..e_N} instead of the ℓ² test.
        #[arg(long)]
        frame: bool,
        /// Angles for the radial bound ("pi/4", "0.5", ...), comma separated.
        #[arg(long, value_delimiter = ',')]
        theta: Vec<String>,
        /// Terms of the series used in the radial integrals.
        #[arg(long, default_value_t = 64)]
        radial_terms: usize,
    },
}

#[derive(Subcommand, Debug)]
pub enum OperatorCommand {
    /// Spectral-synthesis certificate for a truncated operator.
    Certify {
        #[command(flatten)]
        lambda: LambdaArgs,
        #[arg(long)]
        rho: f64,
        /// Eigenvalues u_n (real, comma separated); defaults to rho^lambda_n.
        #[arg(long, value_delimiter = ',')]
        u: Vec<f64>,
        /// all, sample:COUNT or auto.
        #[arg(long, default_value = "auto")]
        partitions: String,
    },
}

fn parse_list(items: &[String]) -> Result<Vec<f64>> {
    items
        .iter()
        .flat_map(|s| s.split(|c: char| c == ',' || c.is_whitespace()))
        .map(|t| t.trim_matches(|c| c == '{' || c == '}' || c == '[' || c == ']'))
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|e| MuntzError::Parameter(format!("bad number '{t}': {e}"))))
        .collect()
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| MuntzError::Format(format!("{}: {e}", path.display())))?;
    // artifacts written by this tool wrap the payload in "report"
    let payload = match v {
        Value::Object(ref m) if m.contains_key("report") && m.contains_key("config") => m["report"].clone(),
        other => other,
    };
    serde_json::from_value(payload).map_err(|e| MuntzError::Format(format!("{}: {e}", path.display())))
}

fn generated(kind: &str, p: f64, q: f64, n: usize) -> Result<ExponentSequence> {
    let kind = ExponentKind::parse(kind)?;
    let params = match kind {
        ExponentKind::Lacunary => BTreeMap::from([("q".to_string(), q)]),
        _ => BTreeMap::from([("p".to_string(), p)]),
    };
    generate_exponents(kind, &params, n)
}

impl LambdaArgs {
    pub fn sequence(&self) -> Result<ExponentSequence> {
        if self.n == 0 {
            return Err(MuntzError::Parameter("N must be at least 1".into()));
        }
        let seq = if self.lambda.is_empty() {
            generated(&self.kind, self.p, self.q, self.n)?
        } else if self.lambda.len() == 1 && Path::new(&self.lambda[0]).is_file() {
            let path = Path::new(&self.lambda[0]);
            match read_json::<ExponentSequence>(path) {
                Ok(s) => s,
                Err(_) => ExponentSequence::custom(read_json::<Vec<f64>>(path)?, DEFAULT_MIN_GAP)?,
            }
        } else {
            ExponentSequence::custom(parse_list(&self.lambda)?, DEFAULT_MIN_GAP)?
        };
        if seq.len() < self.n && !seq.is_generated() {
            return Err(MuntzError::Parameter(format!("N = {} exceeds the {} exponents given", self.n, seq.len())));
        }
        Ok(seq)
    }
}

fn parse_terms(s: &str, prec: u32) -> Result<MuntzSeries> {
    let mut pairs = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (c, e) = part
            .split_once('@')
            .ok_or_else(|| MuntzError::Parameter(format!("term '{part}' is not coeff@exponent")))?;
        let c: f64 = c.trim().parse().map_err(|e| MuntzError::Parameter(format!("bad coefficient in '{part}': {e}")))?;
        let e: f64 = e.trim().parse().map_err(|e| MuntzError::Parameter(format!("bad exponent in '{part}': {e}")))?;
        pairs.push((e, c));
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (exps, coeffs): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    MuntzSeries::from_real(ExponentSequence::custom(exps, DEFAULT_MIN_GAP)?, &coeffs, prec)
}

impl FunctionArgs {
    fn given(&self) -> usize {
        [self.series.is_some(), self.terms.is_some(), self.monomial.is_some(), self.rule.is_some()]
            .iter()
            .filter(|b| **b)
            .count()
    }

    /// The series named by the flags; `lambda` backs `--rule`.
    pub fn series(&self, lambda: &ExponentSequence, prec: u32) -> Result<MuntzSeries> {
        if self.given() != 1 {
            return Err(MuntzError::Parameter(
                "give exactly one of --series, --terms, --monomial, --rule".into(),
            ));
        }
        let s = if let Some(path) = &self.series {
            let s: MuntzSeries = read_json(path)?;
            s.validate()?;
            s
        } else if let Some(t) = &self.terms {
            parse_terms(t, prec)?
        } else if let Some(mu) = self.monomial {
            MuntzSeries::monomial(mu, prec)?
        } else {
            MuntzSeries::from_tag(lambda.clone(), self.rule.as_deref().unwrap_or_default())?
        };
        Ok(s)
    }

    pub fn function(&self, lambda: &ExponentSequence, prec: u32) -> Result<Function> {
        let s = self.series(lambda, prec)?;
        Ok(if self.quadrature { BlackBox::from_series(&s)?.into() } else { s.into() })
    }
}

/// Angle in radians from "0.5", "pi", "pi/4", "3pi/4" or "3*pi/4".
pub fn parse_angle(s: &str) -> Result<f64> {
    let t = s.trim().replace(['*', ' '], "");
    let bad = || MuntzError::Parameter(format!("bad angle '{s}'"));
    if let Some(i) = t.find("pi") {
        let k = match &t[..i] {
            "" => 1.0,
            "-" => -1.0,
            m => m.parse::<f64>().map_err(|_| bad())?,
        };
        let d = match &t[i + 2..] {
            "" => 1.0,
            rest => rest.strip_prefix('/').ok_or_else(bad)?.parse::<f64>().map_err(|_| bad())?,
        };
        Ok(k * std::f64::consts::PI / d)
    } else {
        t.parse().map_err(|_| bad())
    }
}

fn build_config(g: &GlobalArgs, default_out: &str) -> Result<(RunConfig, PathBuf)> {
    let mut cfg = match &g.config {
        Some(p) => read_json::<RunConfig>(p)?,
        None => RunConfig::new(default_precision()),
    };
    if let Some(b) = g.precision {
        cfg.precision_bits = b;
    }
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    for t in &g.tolerances {
        let (k, v) = t
            .split_once('=')
            .ok_or_else(|| MuntzError::Parameter(format!("tolerance '{t}' is not name=value")))?;
        let v: f64 = v.parse().map_err(|e| MuntzError::Parameter(format!("tolerance '{t}': {e}")))?;
        cfg.tolerances.insert(k.to_string(), v);
    }
    let out = g.out.clone().unwrap_or_else(|| PathBuf::from(default_out));
    cfg.output_format = match &g.format {
        Some(f) => OutputFormat::parse(f)?,
        None if g.config.is_some() => cfg.output_format,
        None => match out.extension().and_then(|e| e.to_str()) {
            Some("csv") => OutputFormat::Csv,
            _ => OutputFormat::Json,
        },
    };
    cfg.validate()?;
    Ok((cfg, out))
}

fn default_out(cmd: &Command) -> &'static str {
    match cmd {
        Command::GenExponents { .. } => "lambda.json",
        Command::Gram(_) => "gram.csv",
        Command::Distance(_) => "distance.json",
        Command::Biorthogonal { .. } => "biorthogonal.json",
        Command::Project { .. } => "projection.json",
        Command::Recover { .. } => "recovery.json",
        Command::Eval { .. } => "eval.json",
        Command::Operator { .. } => "cert.json",
        Command::Hereditary { .. } => "hereditary.csv",
        Command::Hardy { .. } => "hardy.json",
    }
}

fn family_for(lambda: &ExponentSequence, n: usize, cfg: &mut RunConfig) -> Result<crate::biorthogonal::BiorthogonalFamily> {
    let bits = cfg.precision_bits;
    cfg.tolerance("inverse", inverse_tolerance(bits));
    dual_family_auto(lambda, n, bits, bits * 4)
}

/// Execute one parsed command and write its report.
pub fn execute(cli: Cli) -> Result<()> {
    let (mut cfg, out) = build_config(&cli.global, default_out(&cli.command))?;
    let bits = cfg.precision_bits;
    match cli.command {
        Command::GenExponents { kind, p, q, n } => {
            let seq = generated(&kind, p, q, n)?;
            emit_report(&seq, "gen-exponents", &cfg, &out)
        }
        Command::Gram(l) => {
            let lam = l.sequence()?.truncated(l.n)?;
            let (g, inv) = cauchy_inverse_auto(&lam, bits, bits * 4)?;
            cfg.tolerance("inverse", inv.tolerance);
            let det = cauchy_determinant(&g)?;
            let rows = |m: &crate::linalg::Matrix| -> Vec<Vec<String>> {
                (0..m.rows()).map(|i| m.row(i).iter().map(dec).collect()).collect()
            };
            let rep = GramReport {
                lambda: lam.values().to_vec(),
                truncation: l.n,
                precision_bits: g.precision_bits,
                entries: rows(&g.entries),
                determinant: dec(&det),
                inverse: rows(&inv.matrix),
                inverse_residual: dec(&inv.residual),
            };
            emit_report(&rep, "gram", &cfg, &out)
        }
        Command::Distance(l) => {
            let rep = distances(&l.sequence()?, l.n, bits)?;
            emit_report(&rep, "distance", &cfg, &out)
        }
        Command::Biorthogonal { lambda, epsilon } => {
            let fam = family_for(&lambda.sequence()?, lambda.n, &mut cfg)?;
            let norm_growth = epsilon.map(|e| norm_growth_check(&fam, e)).transpose()?;
            let rep = BiorthogonalReport { family: FamilyReport::from(&fam), norm_growth };
            emit_report(&rep, "biorthogonal", &cfg, &out)
        }
        Command::Project { lambda, function } => {
            let lam = lambda.sequence()?;
            let f = function.function(&lam, bits)?;
            let fam = family_for(&lam, lambda.n, &mut cfg)?;
            let quad = cfg.quadrature();
            let rep = project(&f, &fam, &quad)?;
            emit_report(&rep, "project", &cfg, &out)
        }
        Command::Recover { lambda, function } => {
            let lam = lambda.sequence()?;
            let f = function.function(&lam, bits)?;
            let fam = family_for(&lam, lambda.n, &mut cfg)?;
            let quad = cfg.quadrature();
            let recovery = recover_coefficients(&f, &fam, &quad)?;
            let rep = RecoveryReport { lambda: fam.lambda.values().to_vec(), recovery };
            emit_report(&rep, "recover", &cfg, &out)
        }
        Command::Eval { function, kind, p, q, z } => {
            let lam = if function.rule.is_some() { generated(&kind, p, q, 1)? } else { ExponentSequence::custom(vec![1.0], DEFAULT_MIN_GAP)? };
            let f = function.series(&lam, bits)?;
            let tol = cfg.tolerance("eval", scaled_tolerance(bits, 8));
            let points = z
                .iter()
                .map(|s| {
                    let v = parse_list(std::slice::from_ref(s))?;
                    let (re, im) = match v.as_slice() {
                        [re] => (*re, 0.0),
                        [re, im] => (*re, *im),
                        _ => return Err(MuntzError::Parameter(format!("point '{s}' is not re,im"))),
                    };
                    let zc = CFloat::from_f64(bits, re, im);
                    let value = evaluate(&f, &SlitDiskPoint::new(zc.clone())?, tol)?;
                    Ok(EvalPoint { z: zc, value })
                })
                .collect::<Result<Vec<_>>>()?;
            emit_report(&EvalReport { tolerance: tol, points }, "eval", &cfg, &out)
        }
        Command::Operator { action: OperatorCommand::Certify { lambda, rho, u, partitions } } => {
            let lam = lambda.sequence()?;
            let fam = family_for(&lam, lambda.n, &mut cfg)?;
            let op = if u.is_empty() {
                dilation_operator(&lam, rho, lambda.n, bits)?
            } else {
                if u.len() != lambda.n {
                    return Err(MuntzError::Parameter(format!("{} eigenvalues for N = {}", u.len(), lambda.n)));
                }
                let u = u.iter().map(|&x| CFloat::from_f64(bits, x, 0.0)).collect();
                MuntzOperator::new(lam.truncated(lambda.n)?, u, rho)?
            };
            let mut tol = CertificateTolerances::for_precision(bits);
            tol.eigen = cfg.tolerance("eigen", tol.eigen);
            tol.adjoint = cfg.tolerance("adjoint", tol.adjoint);
            tol.kernel = cfg.tolerance("kernel", tol.kernel);
            tol.similarity = cfg.tolerance("similarity", tol.similarity);
            tol.normality = cfg.tolerance("normality", tol.normality);
            let sel = match partitions.as_str() {
                "auto" => default_selection(lambda.n, cfg.seed),
                s => PartitionSelection::parse(s, cfg.seed)?,
            };
            let cert = synthesis_certificate(&op, &fam, &tol, sel)?;
            emit_report(&cert, "operator certify", &cfg, &out)
        }
        Command::Hereditary { lambda, partitions, function } => {
            let lam = lambda.sequence()?;
            let fam = family_for(&lam, lambda.n, &mut cfg)?;
            cfg.tolerance("singular", singular_threshold(bits));
            let target = if function.given() == 0 { None } else { Some(function.function(&lam, bits)?) };
            let quad = cfg.quadrature();
            let sel = PartitionSelection::parse(&partitions, cfg.seed)?;
            let rows = hereditary_sweep(&fam, sel, target.as_ref(), &quad)?;
            emit_report(&rows, "hereditary", &cfg, &out)
        }
        Command::Hardy { lambda, function, budget, frame, theta, radial_terms } => {
            let lam = lambda.sequence()?;
            let thetas = theta.iter().map(|t| parse_angle(t)).collect::<Result<Vec<_>>>()?;
            let quad = cfg.quadrature();
            let (mut hardy, series) = if frame {
                let f = function.function(&lam, bits)?;
                let mut opts = FrameOptions::for_precision(bits);
                opts.residual_tolerance = cfg.tolerance("residual", opts.residual_tolerance);
                opts.quadrature = quad.clone();
                (closure_membership_via_frame(&f, &lam, lambda.n, bits, &opts)?, None)
            } else {
                let s = function.series(&lam, bits)?;
                (h2_membership(&s, budget, bits)?, Some(s))
            };
            // M is finite only for members; other verdicts carry no radial bound
            let radial = match (&series, thetas.is_empty()) {
                (Some(s), false) if hardy.member == Membership::Yes => {
                    attach_radial(&mut hardy, s, &thetas, budget, radial_terms, &quad, bits)?
                }
                (None, false) => return Err(MuntzError::Parameter("--theta needs the coefficient test, not --frame".into())),
                _ => Vec::new(),
            };
            emit_report(&HardyRun { hardy, radial }, "hardy", &cfg, &out)
        }
    }
}

#[derive(Serialize)]
struct ErrorObject<'a> {
    error: &'a str,
    message: String,
}

fn error_kind(e: &MuntzError) -> &'static str {
    match e {
        MuntzError::Parameter(_) => "parameter",
        MuntzError::Input(_) => "input",
        MuntzError::Degenerate(_) => "degenerate",
        MuntzError::IndexOutOfRange { .. } => "index_out_of_range",
        MuntzError::PrecisionInsufficient { .. } => "precision_insufficient",
        MuntzError::NotPositiveDefinite(_) => "not_positive_definite",
        MuntzError::Domain(_) => "domain",
        MuntzError::Convergence(_) => "convergence",
        MuntzError::Quadrature { .. } => "quadrature",
        MuntzError::NonMember(_) => "non_member",
        MuntzError::Io { .. } => "io",
        MuntzError::Format(_) => "format",
    }
}

/// Parse `argv` (program name first), run it and return the exit code:
/// 0 on success, 1 on a computational failure, 2 on a usage error.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            let obj = ErrorObject { error: error_kind(&e), message: e.to_string() };
            eprintln!("{}", serde_json::to_string(&obj).expect("error serializes"));
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_lists() {
        let v = parse_list(&["{1,2}".into()]).unwrap();
        assert_eq!(v, vec![1.0, 2.0]);
        let v = parse_list(&["1".into(), "4".into(), "9".into()]).unwrap();
        assert_eq!(v, vec![1.0, 4.0, 9.0]);
        assert!(parse_list(&["x".into()]).is_err());
    }

    #[test]
    fn angles() {
        let pi = std::f64::consts::PI;
        assert_eq!(parse_angle("pi").unwrap(), pi);
        assert_eq!(parse_angle("3pi/4").unwrap(), 3.0 * pi / 4.0);
        assert_eq!(parse_angle("3*pi/4").unwrap(), 3.0 * pi / 4.0);
        assert_eq!(parse_angle("0.5").unwrap(), 0.5);
        assert!(parse_angle("pie").is_err());
    }

    #[test]
    fn terms_sorted_by_exponent() {
        let s = parse_terms("-5@49, 3@4", 128).unwrap();
        assert_eq!(s.lambda.values(), &[4.0, 49.0]);
        assert_eq!(s.coeffs[0].re.to_f64(), 3.0);
        assert!(parse_terms("3", 128).is_err());
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run_command(["muntz", "gram", "--bogus"]), 2);
        assert_eq!(run_command(["muntz", "nope"]), 2);
    }

    #[test]
    fn computation_errors_exit_one() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("x.json");
        let code = run_command(["muntz", "gen-exponents", "--kind", "power", "--p", "0.5", "--n", "3", "--out", out.to_str().unwrap()]);
        assert_eq!(code, 1);
        assert!(!out.exists());
    }

    #[test]
    fn config_records_tolerances() {
        let mut cfg = RunConfig::new(128);
        assert_eq!(cfg.tolerance("x", 1e-3), 1e-3);
        assert_eq!(cfg.tolerance("x", 5.0), 1e-3);
        cfg.tolerances.insert("bad".into(), -1.0);
        assert!(cfg.validate().is_err());
        assert!(RunConfig::new(32).validate().is_err());
    }
}
