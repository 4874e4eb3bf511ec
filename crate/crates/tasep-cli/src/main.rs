//! `tasep` — command-line driver for the exact-solution engine.
//!
//! Exit codes: 0 success, 1 internal/usage failure, 2 validation
//! mismatch (incomplete Bethe catalog, cross-method disagreement).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use tasep_core::{bethe, correlator, montecarlo, oracle, Complex64, RingShape};

const DIFF_GATE: f64 = 1e-6;

#[derive(Parser)]
#[command(name = "tasep", version, about = "Exact TASEP correlation functions on a ring")]
struct Cli {
    /// Cap the worker-thread pool used by the parallel kernels.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Bethe,
    Oracle,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the Bethe equations and emit the solution catalog as JSON.
    Bethe {
        /// Number of ring sites.
        #[arg(long = "M")]
        m: usize,
        /// Number of particles.
        #[arg(long = "N")]
        n: usize,
        /// Residual tolerance for accepting a root set.
        #[arg(long, default_value_t = bethe::DEFAULT_TOL)]
        tol: f64,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the correlation function on a time grid.
    Correlate {
        #[arg(long = "M")]
        m: usize,
        #[arg(long = "N")]
        n: usize,
        /// Probe site (1-based, periodic).
        #[arg(long = "m")]
        site: usize,
        /// Comma-separated list of times, e.g. --t 0,0.5,1.
        #[arg(long = "t", value_delimiter = ',', required = true)]
        t: Vec<f64>,
        #[arg(long, value_enum, default_value_t = Method::Both)]
        method: Method,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(long, default_value_t = bethe::DEFAULT_TOL)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the cross-module invariant suites and print a check table.
    Selftest {
        /// Largest ring size exercised (at most 10).
        #[arg(long = "max-M", default_value_t = 6)]
        max_m: usize,
    },
    /// Monte Carlo estimate of the correlation function.
    Mc {
        #[arg(long = "M")]
        m: usize,
        #[arg(long = "N")]
        n: usize,
        #[arg(long = "m")]
        site: usize,
        #[arg(long = "t")]
        t: f64,
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dump the brute-force generator spectrum.
    Spectrum {
        #[arg(long = "M")]
        m: usize,
        #[arg(long = "N")]
        n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Provenance block embedded in every output file.
#[derive(Serialize)]
struct RunManifest {
    command: String,
    shape: RingShape,
    parameters: BTreeMap<String, String>,
    tool_version: String,
    timestamp: String,
}

impl RunManifest {
    fn new(command: &str, shape: RingShape, params: &[(&str, String)]) -> Self {
        Self {
            command: command.to_string(),
            shape,
            parameters: params
                .iter()
                .map(|(k, v)| (k.to_string(), v.clone()))
                .collect(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: chrono::Utc::now().to_rfc3339(),
        }
    }
}

enum CliError {
    /// Bugs, I/O problems, unusable inputs.
    Internal(String),
    /// The computation ran but failed a pinned consistency gate.
    Validation(String),
}

impl CliError {
    fn internal<E: std::fmt::Display>(e: E) -> Self {
        CliError::Internal(e.to_string())
    }
}

type CliResult = Result<(), CliError>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version are successful outcomes, everything else is a
            // usage error
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(k) = cli.threads {
        // a second build_global in the same process is harmless: the pool
        // is already sized, so the error is ignored
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Internal(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Validation(msg)) => {
            eprintln!("validation mismatch: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> CliResult {
    match command {
        Command::Bethe { m, n, tol, out } => cmd_bethe(m, n, tol, out.as_deref()),
        Command::Correlate {
            m,
            n,
            site,
            t,
            method,
            format,
            tol,
            out,
        } => cmd_correlate(m, n, site, &t, method, format, tol, out.as_deref()),
        Command::Selftest { max_m } => cmd_selftest(max_m),
        Command::Mc {
            m,
            n,
            site,
            t,
            samples,
            seed,
            out,
        } => cmd_mc(m, n, site, t, samples, seed, out.as_deref()),
        Command::Spectrum { m, n, out } => cmd_spectrum(m, n, out.as_deref()),
    }
}

fn make_shape(m: usize, n: usize) -> Result<RingShape, CliError> {
    RingShape::new(m, n).map_err(CliError::internal)
}

fn emit(text: &str, out: Option<&Path>) -> CliResult {
    match out {
        Some(path) => std::fs::write(path, text).map_err(CliError::internal),
        None => {
            println!("{}", text.trim_end());
            Ok(())
        }
    }
}

fn pair(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

// ---------------------------------------------------------------- bethe

#[derive(Serialize)]
struct SolutionOut {
    w: Vec<[f64; 2]>,
    #[serde(rename = "B")]
    b: [f64; 2],
    #[serde(rename = "E")]
    e: [f64; 2],
    theta1: [f64; 2],
    residual: f64,
}

#[derive(Serialize)]
struct CatalogOut {
    manifest: RunManifest,
    #[serde(rename = "M")]
    m: usize,
    #[serde(rename = "N")]
    n: usize,
    includes_stationary: bool,
    solutions: Vec<SolutionOut>,
}

fn cmd_bethe(m: usize, n: usize, tol: f64, out: Option<&Path>) -> CliResult {
    let shape = make_shape(m, n)?;
    let manifest = RunManifest::new("bethe", shape, &[("tol", format!("{tol:e}"))]);
    match bethe::solve_all(shape, tol) {
        Ok(cat) => {
            let payload = CatalogOut {
                manifest,
                m,
                n,
                includes_stationary: cat.includes_stationary,
                solutions: cat
                    .solutions
                    .iter()
                    .map(|s| SolutionOut {
                        w: s.w.iter().copied().map(pair).collect(),
                        b: pair(s.b_const),
                        e: pair(s.energy),
                        theta1: pair(s.theta1),
                        residual: s.residual,
                    })
                    .collect(),
            };
            emit(&to_json(&payload)?, out)
        }
        Err(e @ bethe::BetheError::CountMismatch { found, expected, .. }) => {
            // leave a diagnostics file next to the requested output so CI
            // can distinguish an incomplete catalog from a crash
            let diag_path = match out {
                Some(p) => {
                    let mut os = p.as_os_str().to_owned();
                    os.push(".diag.json");
                    PathBuf::from(os)
                }
                None => PathBuf::from(format!("tasep-bethe-M{m}-N{n}.diag.json")),
            };
            #[derive(Serialize)]
            struct Diag {
                manifest: RunManifest,
                error: String,
                found: usize,
                expected: usize,
            }
            let diag = Diag {
                manifest,
                error: e.to_string(),
                found,
                expected,
            };
            std::fs::write(&diag_path, to_json(&diag)?).map_err(CliError::internal)?;
            Err(CliError::Validation(format!(
                "{e}; diagnostics in {}",
                diag_path.display()
            )))
        }
        Err(e) => Err(CliError::internal(e)),
    }
}

// ------------------------------------------------------------ correlate

#[derive(Serialize)]
struct CorrelateRow {
    m: usize,
    t: f64,
    value_bethe: Option<f64>,
    value_oracle: Option<f64>,
    abs_diff: Option<f64>,
}

#[derive(Serialize)]
struct CorrelateOut {
    manifest: RunManifest,
    rows: Vec<CorrelateRow>,
}

/// 17 significant digits, locale-independent.
fn sig17(x: f64) -> String {
    format!("{x:.16e}")
}

#[allow(clippy::too_many_arguments)]
fn cmd_correlate(
    m: usize,
    n: usize,
    site: usize,
    times: &[f64],
    method: Method,
    format: Format,
    tol: f64,
    out: Option<&Path>,
) -> CliResult {
    let shape = make_shape(m, n)?;
    if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(CliError::Internal("times must be finite and >= 0".into()));
    }
    let want_bethe = matches!(method, Method::Bethe | Method::Both);
    let want_oracle = matches!(method, Method::Oracle | Method::Both);

    let catalog = if want_bethe {
        Some(bethe::solve_all(shape, tol).map_err(CliError::internal)?)
    } else {
        None
    };

    let mut rows = Vec::with_capacity(times.len());
    let mut worst: Option<(f64, f64)> = None;
    for &t in times {
        let value_bethe = match &catalog {
            Some(cat) => Some(
                correlator::correlation(shape, site, t, cat)
                    .map_err(CliError::internal)?
                    .value,
            ),
            None => None,
        };
        let value_oracle = if want_oracle {
            Some(oracle::direct_correlation(shape, site, t).map_err(CliError::internal)?)
        } else {
            None
        };
        let abs_diff = match (value_bethe, value_oracle) {
            (Some(b), Some(o)) => {
                let d = (b - o).abs();
                if worst.is_none_or(|(w, _)| d > w) {
                    worst = Some((d, t));
                }
                Some(d)
            }
            _ => None,
        };
        rows.push(CorrelateRow {
            m: site,
            t,
            value_bethe,
            value_oracle,
            abs_diff,
        });
    }

    let manifest = RunManifest::new(
        "correlate",
        shape,
        &[
            ("m", site.to_string()),
            ("t", times.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(",")),
            (
                "method",
                match method {
                    Method::Bethe => "bethe",
                    Method::Oracle => "oracle",
                    Method::Both => "both",
                }
                .to_string(),
            ),
            ("tol", format!("{tol:e}")),
        ],
    );

    let text = match format {
        Format::Json => to_json(&CorrelateOut { manifest, rows: take(&mut rows) })?,
        Format::Csv => {
            let mut s = String::new();
            let _ = writeln!(s, "# manifest: {}", serde_json::to_string(&manifest).map_err(CliError::internal)?);
            s.push_str("m,t,value_bethe,value_oracle,abs_diff\n");
            for r in &rows {
                let cell = |v: Option<f64>| v.map(sig17).unwrap_or_default();
                let _ = writeln!(
                    s,
                    "{},{},{},{},{}",
                    r.m,
                    sig17(r.t),
                    cell(r.value_bethe),
                    cell(r.value_oracle),
                    cell(r.abs_diff)
                );
            }
            s
        }
    };
    emit(&text, out)?;

    if let Some((d, t)) = worst {
        if d > DIFF_GATE {
            return Err(CliError::Validation(format!(
                "|bethe - oracle| = {d:.3e} at t = {t} exceeds {DIFF_GATE:e}"
            )));
        }
    }
    Ok(())
}

fn take(rows: &mut Vec<CorrelateRow>) -> Vec<CorrelateRow> {
    std::mem::take(rows)
}

// --------------------------------------------------------------- selftest

fn cmd_selftest(max_m: usize) -> CliResult {
    if max_m > 10 {
        return Err(CliError::Internal("--max-M must be at most 10".into()));
    }
    let checks: Vec<(&str, Box<dyn Fn() -> Result<(), String>>)> = vec![
        (
            "qism/rtt-relation",
            Box::new(move || selftest_rtt(max_m.min(6))),
        ),
        (
            "qism/shift-period",
            Box::new(move || selftest_shift(max_m.min(8))),
        ),
        (
            "qism/hamiltonian",
            Box::new(move || selftest_hamiltonian(max_m.min(6))),
        ),
        (
            "bethe/completeness",
            Box::new(move || selftest_bethe(max_m)),
        ),
        (
            "detforms/scalar-product",
            Box::new(move || selftest_scalar_product(max_m.min(8))),
        ),
        (
            "detforms/norm",
            Box::new(move || selftest_norm(max_m.min(8))),
        ),
        (
            "correlator/oracle-agreement",
            Box::new(move || selftest_correlator(max_m)),
        ),
        (
            "correlator/sum-rules",
            Box::new(move || selftest_sum_rules(max_m)),
        ),
        ("montecarlo/consistency", Box::new(selftest_mc)),
    ];

    let mut failures = 0usize;
    for (name, check) in &checks {
        match check() {
            Ok(()) => println!("[ OK ] {name}"),
            Err(msg) => {
                failures += 1;
                println!("[FAIL] {name}: {msg}");
            }
        }
    }
    println!(
        "selftest: {}/{} checks passed (max M = {max_m})",
        checks.len() - failures,
        checks.len()
    );
    if failures > 0 {
        return Err(CliError::Internal(format!("{failures} check(s) failed")));
    }
    Ok(())
}

fn selftest_rtt(max_m: usize) -> Result<(), String> {
    for m in 2..=max_m {
        for (u, v) in [
            (Complex64::new(1.3, 0.0), Complex64::new(0.7, 0.2)),
            (Complex64::new(0.9, 0.4), Complex64::new(1.1, -0.3)),
            (Complex64::new(0.6, -0.8), Complex64::new(1.0, 0.1)),
        ] {
            let res = tasep_core::qism::rtt_residual(u, v, m).map_err(|e| e.to_string())?;
            if res >= 1e-12 {
                return Err(format!("M={m}: residual {res:.3e} at u={u}, v={v}"));
            }
        }
    }
    Ok(())
}

fn selftest_shift(max_m: usize) -> Result<(), String> {
    for m in 2..=max_m {
        let tau = tasep_core::qism::shift_operator(m).map_err(|e| e.to_string())?;
        let mut p = tau.clone();
        for _ in 1..m {
            p = p.dot(&tau);
        }
        let dim = 1usize << m;
        for i in 0..dim {
            for j in 0..dim {
                let want = Complex64::new(if i == j { 1.0 } else { 0.0 }, 0.0);
                if p[[i, j]] != want {
                    return Err(format!("M={m}: tau^M differs from identity at ({i},{j})"));
                }
            }
        }
    }
    Ok(())
}

fn selftest_hamiltonian(max_m: usize) -> Result<(), String> {
    for m in 2..=max_m {
        let a = tasep_core::qism::hamiltonian_from_transfer(m).map_err(|e| e.to_string())?;
        let b = tasep_core::qism::hamiltonian_direct(m).map_err(|e| e.to_string())?;
        let worst = a
            .iter()
            .zip(b.iter())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0f64, f64::max);
        if worst >= 1e-8 {
            return Err(format!("M={m}: |H_tau - H_direct| = {worst:.3e}"));
        }
    }
    Ok(())
}

fn selftest_bethe(max_m: usize) -> Result<(), String> {
    for m in 2..=max_m {
        for n in 1..m {
            let shape = RingShape::new(m, n).map_err(|e| e.to_string())?;
            let cat = bethe::solve_all(shape, bethe::DEFAULT_TOL).map_err(|e| e.to_string())?;
            let expected = shape.dim() - 1;
            if cat.solutions.len() != expected {
                return Err(format!(
                    "M={m} N={n}: {} of {expected} solutions",
                    cat.solutions.len()
                ));
            }
            for s in &cat.solutions {
                if s.residual >= 1e-10 {
                    return Err(format!("M={m} N={n}: residual {:.3e}", s.residual));
                }
                let dev = (s.theta1.powu(m as u32) - 1.0).norm();
                if dev >= 1e-8 {
                    return Err(format!("M={m} N={n}: |Theta(1)^M - 1| = {dev:.3e}"));
                }
            }
        }
    }
    Ok(())
}

fn selftest_scalar_product(max_m: usize) -> Result<(), String> {
    use tasep_core::qism::{self, Side};
    // fixed generic parameters, scaled per index
    for m in 2..=max_m {
        for n in 1..=3usize.min(m) {
            let v: Vec<Complex64> = (0..n)
                .map(|i| Complex64::new(0.9 + 0.17 * i as f64, 0.31 - 0.12 * i as f64))
                .collect();
            let u: Vec<Complex64> = (0..n)
                .map(|i| Complex64::new(0.75 - 0.11 * i as f64, -0.23 + 0.19 * i as f64))
                .collect();
            let got = tasep_core::detforms::scalar_product(&v, &u, m).map_err(|e| e.to_string())?;
            let left = qism::build_state(&v, Side::Left, m).map_err(|e| e.to_string())?;
            let right = qism::build_state(&u, Side::Right, m).map_err(|e| e.to_string())?;
            let want = qism::pair(&left, &right);
            let rel = (got - want).norm() / want.norm().max(f64::MIN_POSITIVE);
            if rel >= 1e-10 {
                return Err(format!("M={m} N={n}: relative error {rel:.3e}"));
            }
        }
    }
    Ok(())
}

fn selftest_norm(max_m: usize) -> Result<(), String> {
    use tasep_core::qism::{self, Side};
    for m in 2..=max_m {
        for n in 1..m {
            let shape = RingShape::new(m, n).map_err(|e| e.to_string())?;
            let cat = bethe::solve_all(shape, bethe::DEFAULT_TOL).map_err(|e| e.to_string())?;
            for s in &cat.solutions {
                let u: Vec<Complex64> = s
                    .w
                    .iter()
                    .map(|&w| tasep_core::detforms::u_from_w(w))
                    .collect();
                let got = tasep_core::detforms::norm_squared(&s.w, shape, 1e-8)
                    .map_err(|e| e.to_string())?;
                let left = qism::build_state(&u, Side::Left, m).map_err(|e| e.to_string())?;
                let right = qism::build_state(&u, Side::Right, m).map_err(|e| e.to_string())?;
                let want = qism::pair(&left, &right);
                let rel = (got - want).norm() / want.norm().max(1.0);
                if rel >= 1e-8 {
                    return Err(format!("M={m} N={n}: relative error {rel:.3e}"));
                }
            }
        }
    }
    Ok(())
}

fn selftest_correlator(max_m: usize) -> Result<(), String> {
    for (m, n) in [(2usize, 1usize), (3, 1), (4, 2), (5, 2), (6, 3)] {
        if m > max_m {
            continue;
        }
        let shape = RingShape::new(m, n).map_err(|e| e.to_string())?;
        let cat = bethe::solve_all(shape, bethe::DEFAULT_TOL).map_err(|e| e.to_string())?;
        for site in 1..=m {
            for t in [0.0, 0.3, 1.0, 3.0] {
                let b = correlator::correlation(shape, site, t, &cat)
                    .map_err(|e| e.to_string())?
                    .value;
                let o = oracle::direct_correlation(shape, site, t).map_err(|e| e.to_string())?;
                if (b - o).abs() >= 1e-8 {
                    return Err(format!(
                        "M={m} N={n} m={site} t={t}: |diff| = {:.3e}",
                        (b - o).abs()
                    ));
                }
            }
        }
    }
    Ok(())
}

fn selftest_sum_rules(max_m: usize) -> Result<(), String> {
    for m in 2..=max_m {
        for n in 1..m {
            let shape = RingShape::new(m, n).map_err(|e| e.to_string())?;
            let cat = bethe::solve_all(shape, bethe::DEFAULT_TOL).map_err(|e| e.to_string())?;
            for site in 1..=m {
                let got = correlator::correlation(shape, site, 0.0, &cat)
                    .map_err(|e| e.to_string())?
                    .value;
                let want = if site == 1 {
                    (m - n) as f64 / m as f64
                } else {
                    tasep_core::combinat::binomial(m as u64 - 2, n as u64)
                        .map_err(|e| e.to_string())? as f64
                        / shape.z()
                };
                if (got - want).abs() >= 1e-8 {
                    return Err(format!("M={m} N={n} m={site}: got {got}, want {want}"));
                }
            }
        }
    }
    Ok(())
}

fn selftest_mc() -> Result<(), String> {
    let shape = RingShape::new(4, 2).map_err(|e| e.to_string())?;
    let cat = bethe::solve_all(shape, bethe::DEFAULT_TOL).map_err(|e| e.to_string())?;
    let exact = correlator::correlation(shape, 3, 1.0, &cat)
        .map_err(|e| e.to_string())?
        .value;
    let est = montecarlo::estimate_correlation(montecarlo::McConfig {
        shape,
        samples: 20_000,
        t: 1.0,
        m: 3,
        seed: 0x5e1f,
    })
    .map_err(|e| e.to_string())?;
    let z = (est.mean - exact) / est.std_error;
    if z.abs() >= 4.0 {
        return Err(format!("mean {} vs exact {exact}: z = {z:.2}", est.mean));
    }
    Ok(())
}

// -------------------------------------------------------------------- mc

fn cmd_mc(
    m: usize,
    n: usize,
    site: usize,
    t: f64,
    samples: u64,
    seed: u64,
    out: Option<&Path>,
) -> CliResult {
    let shape = make_shape(m, n)?;
    let est = montecarlo::estimate_correlation(montecarlo::McConfig {
        shape,
        samples,
        t,
        m: site,
        seed,
    })
    .map_err(CliError::internal)?;

    #[derive(Serialize)]
    struct Plain {
        mean: f64,
        std_error: f64,
        samples: u64,
    }
    let plain = Plain {
        mean: est.mean,
        std_error: est.std_error,
        samples: est.samples,
    };
    println!("{}", serde_json::to_string(&plain).map_err(CliError::internal)?);

    if let Some(path) = out {
        #[derive(Serialize)]
        struct WithManifest {
            manifest: RunManifest,
            mean: f64,
            std_error: f64,
            samples: u64,
        }
        let manifest = RunManifest::new(
            "mc",
            shape,
            &[
                ("m", site.to_string()),
                ("t", t.to_string()),
                ("samples", samples.to_string()),
                ("seed", seed.to_string()),
            ],
        );
        let payload = WithManifest {
            manifest,
            mean: est.mean,
            std_error: est.std_error,
            samples: est.samples,
        };
        emit(&to_json(&payload)?, Some(path))?;
    }
    Ok(())
}

// -------------------------------------------------------------- spectrum

fn cmd_spectrum(m: usize, n: usize, out: Option<&Path>) -> CliResult {
    let shape = make_shape(m, n)?;
    let gen = oracle::build_generator(shape).map_err(CliError::internal)?;
    let spec = oracle::spectrum(&gen).map_err(CliError::internal)?;

    #[derive(Serialize)]
    struct SpectrumOut {
        manifest: RunManifest,
        #[serde(rename = "M")]
        m: usize,
        #[serde(rename = "N")]
        n: usize,
        eigenvalues: Vec<[f64; 2]>,
        zero_index: usize,
        gap: f64,
    }
    let payload = SpectrumOut {
        manifest: RunManifest::new("spectrum", shape, &[]),
        m,
        n,
        eigenvalues: spec.eigenvalues.iter().copied().map(pair).collect(),
        zero_index: spec.zero_index,
        gap: spec.gap,
    };
    emit(&to_json(&payload)?, out)
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(value).map_err(CliError::internal)
}
