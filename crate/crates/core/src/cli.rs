//! Command-line front end. Every subcommand writes a JSON document carrying a
//! `verdict` field, plus CSV where a table is natural.
//!
//! Exit codes: 0 when the verdict passes, 2 when it fails, 1 on usage or data errors.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use crate::almostperiodic::{
    find_almost_periods, ronkin_coefficient, theorem7_check, Samples, Source,
    COEFFICIENT_TOLERANCE, SERIES_TAIL_TOLERANCE,
};
use crate::counterexample::{
    certify_unboundedness, choose_tau, run_pipeline, smallest_passing_n0, terms_of, witness_csv,
    witnesses, CounterexampleBundle, CounterexampleConfig, TauRule,
};
use crate::distribution::{fq_verdict, DiscreteDistribution};
use crate::error::{Error, Result};
use crate::exact::{parse_rational, pow2, to_f64, Rational};
use crate::periodic::{
    construct_sigma, lemma3_ratio, MassPolicy, Sigma, HOLE_TOLERANCE,
};
use crate::pointset::{classify, PointSet, DEFAULT_H_MAX};
use crate::schwartz::{TestFunction, TestFunctionDocument};

const AFTER_HELP: &str = "\
CSV outputs (floats as {:.16e}, exact rationals as p/q):
  sigma          j,abs_c,abs_chat
  lemma3         tau,ratio,seminorm,abs_pairing
  witness        n,t_n,abs_s,lower_bound,verdict
  apfind         tau,defect
  fourier-coeff  lambda,re_a,im_a,convergence
  report         r,rho,variation
See FORMATS.md for the JSON inputs.
Environment: QCLAB_THREADS caps the worker threads.";

#[derive(Debug, Parser)]
#[command(name = "qclab", version, about = "Crystalline measures and discrete distributions on the line", after_help = AFTER_HELP)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// Omit the `generated_unix` field so repeated runs are byte-identical.
    #[arg(long, global = true)]
    pub no_timestamp: bool,
    /// Suppress the one-line summary on stdout.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    /// Hole residual tolerance for sigma.
    #[arg(long, global = true, default_value_t = HOLE_TOLERANCE)]
    pub hole_tol: f64,
    /// Truncation tolerance for series tails.
    #[arg(long, global = true, default_value_t = SERIES_TAIL_TOLERANCE)]
    pub tail_tol: f64,
    /// Agreement tolerance for Fourier coefficients.
    #[arg(long, global = true, default_value_t = COEFFICIENT_TOLERANCE)]
    pub coef_tol: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PolicyArg {
    Translate,
    Unit,
}

impl From<PolicyArg> for MassPolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Translate => MassPolicy::Translate,
            PolicyArg::Unit => MassPolicy::Unit,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Separation, density and p-discreteness of a point set.
    Classify {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_H_MAX)]
        h_max: f64,
        #[arg(long, default_value = "classify.json")]
        out: PathBuf,
    },
    /// Periodic comb with support and spectrum holes.
    Sigma {
        #[arg(long = "M")]
        m: u64,
        #[arg(long, default_value = "1/8")]
        alpha: String,
        #[arg(long, default_value = "sigma.json")]
        out: PathBuf,
    },
    /// Ratio |(σ^{2τ} - σ^τ, φ)| / (τ N_{2,1}(φ)) over τ = 2^-k.
    Lemma3 {
        #[arg(long = "M", default_value_t = 16)]
        m: u64,
        #[arg(long, default_value = "1/8")]
        alpha: String,
        /// `gaussian`, `gaussian:CENTER,WIDTH` or a test-function JSON file.
        #[arg(long, default_value = "gaussian:8,0.15")]
        phi: String,
        #[arg(long, default_value_t = 4)]
        k_min: i64,
        #[arg(long, default_value_t = 14)]
        k_max: i64,
        #[arg(long, default_value = "lemma3.json")]
        out: PathBuf,
    },
    /// Build and certify the unbounded-convolution construction.
    Counterexample {
        #[arg(long, default_value_t = 2)]
        n0: u32,
        #[arg(long, default_value_t = 4)]
        nmax: u32,
        #[arg(long, default_value_t = 16)]
        base: u64,
        #[arg(long, default_value = "n^2+3n+1")]
        tau_rule: String,
        #[arg(long, value_enum, default_value_t = PolicyArg::Translate)]
        mass_policy: PolicyArg,
        #[arg(long, default_value = "bundle.json")]
        out: PathBuf,
    },
    /// Recompute the witness table of a bundle.
    Witness {
        bundle: PathBuf,
        #[arg(long, default_value = "witness.json")]
        out: PathBuf,
    },
    /// ε-almost periods of sampled data (`t,re[,im]` CSV).
    Apfind {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        range: f64,
        /// Defaults to the grid step.
        #[arg(long)]
        step: Option<f64>,
        #[arg(long, default_value = "apfind.json")]
        out: PathBuf,
    },
    /// Ronkin coefficients of a measure; with --transform, compare against its atoms.
    FourierCoeff {
        #[arg(long)]
        measure: PathBuf,
        #[arg(long = "lambda", allow_hyphen_values = true)]
        lambdas: Vec<String>,
        #[arg(long, default_value = "gaussian")]
        phi: String,
        #[arg(long, default_value = "gaussian:0.25,0.8")]
        phi2: String,
        /// Geometric sweep of averaging radii.
        #[arg(long, value_delimiter = ',', default_values_t = [16.0, 32.0, 64.0])]
        radii: Vec<f64>,
        /// Candidate spectrum: every atom with |λ| < --max-lambda is checked.
        #[arg(long)]
        transform: Option<PathBuf>,
        #[arg(long, default_value_t = 2.0)]
        max_lambda: f64,
        #[arg(long, default_value = "coefficients.json")]
        out: PathBuf,
    },
    /// Poisson self-duality of the integer comb against Gaussians.
    CombTest {
        #[arg(long, default_value_t = 200)]
        window: i64,
        #[arg(long, default_value = "comb_test.json")]
        out: PathBuf,
    },
    /// Growth diagnostics of a measure, and the quasicrystal verdict when its transform is given.
    Report {
        #[arg(long)]
        measure: PathBuf,
        #[arg(long)]
        transform: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_H_MAX)]
        h_max: f64,
        #[arg(long, default_value = "report.json")]
        out: PathBuf,
    },
}

/// Caps the global worker pool from `QCLAB_THREADS`; later calls are ignored.
pub fn configure_threads() {
    if let Some(n) = std::env::var("QCLAB_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

/// Parses `argv` (program name first) and runs it; returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(verdict) => {
            if verdict_passes(&verdict) {
                0
            } else {
                2
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn verdict_passes(v: &str) -> bool {
    v.starts_with("pass")
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn with_context<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        // serde_json messages end with "at line L column C"
        Error::Json(j) => Error::Parse(format!("{}: {j}", path.display())),
        other => other,
    })
}

fn csv_path(out: &Path) -> PathBuf {
    out.with_extension("csv")
}

struct Emitter<'a> {
    global: &'a GlobalOpts,
}

impl Emitter<'_> {
    /// Writes `body` with `verdict` (and a timestamp unless disabled); returns the verdict.
    fn json<T: Serialize>(&self, out: &Path, body: &T, verdict: &str) -> Result<String> {
        let mut v = serde_json::to_value(body)?;
        let obj = match v {
            Value::Object(ref mut m) => m,
            _ => {
                v = json!({ "result": v });
                v.as_object_mut().expect("object")
            }
        };
        obj.insert("verdict".into(), Value::String(verdict.into()));
        if !self.global.no_timestamp {
            let secs = SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0);
            obj.insert("generated_unix".into(), json!(secs));
        }
        let mut text = serde_json::to_string_pretty(&v)?;
        text.push('\n');
        std::fs::write(out, text)?;
        if !self.global.quiet {
            println!("verdict: {verdict}  -> {}", out.display());
        }
        Ok(verdict.to_string())
    }

    fn csv(&self, out: &Path, text: &str) -> Result<()> {
        std::fs::write(out, text)?;
        if !self.global.quiet {
            println!("table -> {}", out.display());
        }
        Ok(())
    }
}

/// `gaussian`, `gaussian:CENTER,WIDTH`, or a path to a test-function document.
pub fn parse_phi(spec: &str) -> Result<TestFunction> {
    if spec == "gaussian" {
        return Ok(TestFunction::standard_gaussian());
    }
    if let Some(args) = spec.strip_prefix("gaussian:") {
        let parts: Vec<&str> = args.split(',').collect();
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad number {s:?} in {spec:?}")))
        };
        if parts.len() != 2 {
            return Err(Error::Parse(format!("expected gaussian:CENTER,WIDTH, got {spec:?}")));
        }
        return TestFunction::gaussian(num(parts[0])?, num(parts[1])?).validated();
    }
    let path = Path::new(spec);
    let doc: Result<TestFunctionDocument> =
        read(path).and_then(|s| serde_json::from_str(&s).map_err(Error::from));
    with_context(path, doc)?.into_function()
}

fn load_distribution(path: &Path) -> Result<DiscreteDistribution> {
    with_context(path, read(path).and_then(|s| DiscreteDistribution::from_json(&s)))
}

fn execute(cli: &Cli) -> Result<String> {
    let g = &cli.global;
    for (name, v) in [("hole-tol", g.hole_tol), ("tail-tol", g.tail_tol), ("coef-tol", g.coef_tol)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::OutOfRange(format!("--{name} must be positive, got {v}")));
        }
    }
    let emit = Emitter { global: g };
    match &cli.command {
        Command::Classify { input, h_max, out } => {
            let set = with_context(input, read(input).and_then(|s| PointSet::from_json(&s)))?;
            let report = classify(&set, *h_max)?;
            emit.json(out, &report, "pass")
        }
        Command::Sigma { m, alpha, out } => {
            let alpha = parse_rational(alpha)?;
            let sigma = construct_sigma(*m, &alpha)?;
            let (residual, body) = match &sigma {
                Sigma::Materialized(p) => {
                    emit.csv(&csv_path(out), &p.profile_csv())?;
                    (p.support_residual.max(p.spectrum_residual), serde_json::to_value(p)?)
                }
                Sigma::Lazy(a) => (a.spectrum_residual_relative, serde_json::to_value(a)?),
            };
            let verdict = if residual <= g.hole_tol { "pass" } else { "fail: hole residual above tolerance" };
            emit.json(out, &body, verdict)
        }
        Command::Lemma3 { m, alpha, phi, k_min, k_max, out } => {
            if k_min > k_max || *k_min < 2 {
                return Err(Error::OutOfRange(format!("k range {k_min}..={k_max}")));
            }
            let phi = parse_phi(phi)?;
            let sigma = construct_sigma(*m, &parse_rational(alpha)?)?;
            let rows = (*k_min..=*k_max)
                .map(|k| lemma3_ratio(&sigma, &pow2(-k), &phi))
                .collect::<Result<Vec<_>>>()?;
            let mut ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
            ratios.sort_by(f64::total_cmp);
            let median = ratios[ratios.len() / 2];
            let max = *ratios.last().expect("nonempty");
            let spread = max / median;
            let mut table = String::from("tau,ratio,seminorm,abs_pairing\n");
            for r in &rows {
                table.push_str(&format!(
                    "{},{:.16e},{:.16e},{:.16e}\n",
                    crate::exact::format_rational(&r.tau),
                    r.ratio,
                    r.seminorm,
                    r.pairing.norm()
                ));
            }
            emit.csv(&csv_path(out), &table)?;
            let verdict = if spread <= 4.0 { "pass" } else { "fail: max/median above 4" };
            emit.json(out, &json!({ "measurements": rows, "max_over_median": spread }), verdict)
        }
        Command::Counterexample { n0, nmax, base, tau_rule, mass_policy, out } => {
            let config = CounterexampleConfig {
                n0: *n0,
                n_max: *nmax,
                base: *base,
                tau_rule: tau_rule.parse::<TauRule>()?,
                mass_policy: (*mass_policy).into(),
                ..Default::default()
            };
            let report = choose_tau(&config)?;
            if let Some(v) = &report.first_violation {
                let verdict = format!("fail: {v}");
                return emit.json(out, &json!({ "config": config, "tau_report": report }), &verdict);
            }
            let mut pipeline = run_pipeline(&config)?;
            pipeline.bundle.n0_reported = smallest_passing_n0(&config);
            let verdict = pipeline.bundle.verdict.clone();
            emit.json(out, &pipeline.bundle, &verdict)
        }
        Command::Witness { bundle, out } => {
            let b: CounterexampleBundle = with_context(
                bundle,
                read(bundle).and_then(|s| serde_json::from_str(&s).map_err(Error::from)),
            )?;
            let ws = witnesses(&terms_of(&b));
            emit.csv(&csv_path(out), &witness_csv(&ws))?;
            let verdict = match certify_unboundedness(&b) {
                Ok(_) => "pass".to_string(),
                Err(e) => format!("fail: {e}"),
            };
            emit.json(out, &json!({ "witnesses": ws }), &verdict)
        }
        Command::Apfind { input, eps, range, step, out } => {
            let samples = Samples::from_csv(&read(input)?)?;
            let a = find_almost_periods(&samples, *eps, *range, step.unwrap_or(samples.dt))?;
            emit.csv(&csv_path(out), &a.to_csv())?;
            let verdict = if a.verdict.starts_with("relatively dense") {
                "pass".to_string()
            } else {
                format!("fail: {}", a.verdict)
            };
            emit.json(out, &a, &verdict)
        }
        Command::FourierCoeff { measure, lambdas, phi, phi2, radii, transform, max_lambda, out } => {
            let f = load_distribution(measure)?;
            let phi = parse_phi(phi)?;
            if let Some(t) = transform {
                let fhat = load_distribution(t)?;
                let cands: Vec<(f64, Complex64)> = fhat
                    .atoms()
                    .iter()
                    .filter(|a| a.order == 0 && a.location.abs_f64() < *max_lambda)
                    .map(|a| (a.location.to_f64(), a.mass))
                    .collect();
                let r = theorem7_check(Source::Distribution(&f), &cands, &phi, radii, g.coef_tol)?;
                emit.csv(&csv_path(out), &r.to_csv())?;
                let verdict = r.verdict.clone();
                return emit.json(out, &r, &verdict);
            }
            if lambdas.is_empty() {
                return Err(Error::OutOfRange("give --lambda or --transform".into()));
            }
            let phi2 = parse_phi(phi2)?;
            let mut reports = Vec::new();
            let mut table = String::from("lambda,re_a,im_a,convergence\n");
            for l in lambdas {
                let lambda: Rational = parse_rational(l)?;
                let r = ronkin_coefficient(Source::Distribution(&f), to_f64(&lambda), &phi, &phi2, radii, g.coef_tol)?;
                table.push_str(&format!(
                    "{:.16e},{:.16e},{:.16e},{:.16e}\n",
                    r.lambda,
                    r.value.re,
                    r.value.im,
                    r.bohr.cauchy.last().copied().unwrap_or(0.0)
                ));
                reports.push(r);
            }
            emit.csv(&csv_path(out), &table)?;
            let verdict = if reports.iter().all(|r| r.phi_independent) {
                "pass"
            } else {
                "fail: coefficient depends on the test function"
            };
            emit.json(out, &json!({ "coefficients": reports }), verdict)
        }
        Command::CombTest { window, out } => {
            let comb = DiscreteDistribution::integer_comb(*window as f64);
            let mut rows = Vec::new();
            let mut worst = 0.0f64;
            for (c, w) in [(0.0, 1.0), (0.3, 0.8), (-0.2, 1.5)] {
                let phi = TestFunction::gaussian(c, w);
                let lhs = comb.apply(&phi)?;
                let rhs = comb.apply(&phi.fourier()?)?;
                let diff = (lhs - rhs).norm();
                worst = worst.max(diff);
                rows.push(json!({ "center": c, "width": w, "comb_phi": lhs, "comb_phi_hat": rhs, "difference": diff }));
            }
            let verdict = if worst <= 1e-9 { "pass" } else { "fail: Poisson sums disagree" };
            emit.json(out, &json!({ "window": window, "cases": rows, "max_difference": worst }), verdict)
        }
        Command::Report { measure, transform, h_max, out } => {
            let mu = load_distribution(measure)?;
            let growth = mu.growth_report()?;
            let coefficients = mu.coefficient_growth_check();
            emit.csv(&csv_path(out), &growth.to_csv())?;
            match transform {
                Some(t) => {
                    let mu_hat = load_distribution(t)?;
                    let fq = fq_verdict(&mu, &mu_hat, *h_max)?;
                    let verdict = if fq.fourier_quasicrystal {
                        "pass".to_string()
                    } else {
                        format!("fail: {}", fq.failed_hypothesis.clone().unwrap_or_default())
                    };
                    emit.json(out, &json!({ "growth": growth, "coefficient_growth": coefficients, "fq": fq }), &verdict)
                }
                None => {
                    let verdict = if growth.tempered { "pass" } else { "fail: growth not polynomial" };
                    emit.json(out, &json!({ "growth": growth, "coefficient_growth": coefficients }), verdict)
                }
            }
        }
    }
}
