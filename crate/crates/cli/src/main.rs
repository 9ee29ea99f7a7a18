//! `sdalab`: seeded batch experiments emitting CSV and JSON.
//!
//! The primary output goes to stdout. When `--out-dir` or `SDALAB_OUT_DIR` is
//! set, every artifact is also written there. CSV files start with a
//! `# config=<json>` line and JSON documents carry a `config` field; either can
//! be fed back to `sdalab replay` to reproduce the file byte for byte.

use std::f64::consts::{LN_2, PI};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use sdalab::badk;
use sdalab::bestapprox::{chain_engine, chain_engine_to, direct_scan, sample_theta, ThetaMatrix};
use sdalab::dynamics::return_map_orbit_1d;
use sdalab::estimators::{
    bjw_empirical, bjw_oracle_cdf_1d, ks_distance, levy_closed_form_1d, levy_ergodic, surface_mc_2d,
    surface_measure_1d_quadrature, DEFAULT_H_BOX,
};
use sdalab::scalar::{fraction_string, format_time};
use sdalab::{minkowski_bound, Error, Split};

const LEVY_1_1: f64 = PI * PI / (12.0 * LN_2);
const LEVY_2_1: f64 = 1.135_256_974;

#[derive(Parser)]
#[command(name = "sdalab", version, about = "Best simultaneous Diophantine approximation lab")]
struct Cli {
    /// Directory for output files; defaults to $SDALAB_OUT_DIR.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "lowercase")]
enum Cmd {
    /// Best approximation denominators of a rational or sampled θ.
    Bestapprox(BestapproxArgs),
    /// Lévy constant estimates over random θ.
    Levy(TrialArgs),
    /// Pooled β distribution and its CDF table.
    Dist(TrialArgs),
    /// Measure of the transversal S.
    Surface(SurfaceArgs),
    /// First-return map orbit, enumeration against the explicit formula.
    Returnmap(ReturnmapArgs),
    /// Certified prefix of a point badly approximable at lag one only.
    Badk(BadkArgs),
    /// Re-run the configuration embedded in an output file.
    #[serde(skip)]
    Replay { file: PathBuf },
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
struct BestapproxArgs {
    #[arg(long, default_value_t = 1)]
    d: usize,
    #[arg(long, default_value_t = 1)]
    c: usize,
    /// Row-major entries `p/q,p/q,…` of the d×c matrix θ.
    #[arg(long)]
    theta: Option<String>,
    /// Sample θ with dyadic entries instead.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 64)]
    bits: u32,
    /// Stop after the last record with ‖Q‖ ≤ qmax.
    #[arg(long)]
    qmax: Option<u64>,
    /// Stop after this many records.
    #[arg(long)]
    count: Option<usize>,
    /// `chain` (minimal vectors) or `scan` (exhaustive, needs --qmax).
    #[arg(long, default_value = "chain")]
    engine: String,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
struct TrialArgs {
    #[arg(long, default_value_t = 1)]
    d: usize,
    #[arg(long, default_value_t = 1)]
    c: usize,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 100)]
    depth: usize,
    #[arg(long, default_value_t = 256)]
    bits: u32,
    /// Generated and printed when omitted.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
struct SurfaceArgs {
    #[arg(long, default_value_t = 1)]
    d: usize,
    /// Monte Carlo samples (d = 2).
    #[arg(long, default_value_t = 20_000)]
    samples: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_H_BOX)]
    h_box: f64,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
struct ReturnmapArgs {
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
struct BadkArgs {
    #[arg(long, default_value_t = 10)]
    steps: usize,
    #[arg(long, default_value_t = badk::DEFAULT_X_SEARCH_BOUND)]
    x_search_bound: u64,
}

enum Failure {
    Usage(String),
    Lib(Error),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Io(_) => 1,
            Failure::Lib(e) => match e {
                Error::Parse(_) | Error::InvalidArgument(_) | Error::DimensionMismatch { .. } => 2,
                Error::BudgetExceeded { .. } | Error::SearchExhausted(_) => 3,
                Error::NonGeneric(_) | Error::Resonance(_) => 4,
                _ => 1,
            },
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage: {m}"),
            Failure::Lib(e) => write!(f, "{e}"),
            Failure::Io(m) => write!(f, "io: {m}"),
        }
    }
}

type Run<T> = std::result::Result<T, Failure>;

/// Named output files of one run; the first one is echoed to stdout.
struct Outputs(Vec<(String, String)>);

impl Outputs {
    fn write(&self, dir: Option<&Path>) -> Run<()> {
        if let Some((_, main)) = self.0.first() {
            print!("{main}");
        }
        if let Some(dir) = dir {
            fs::create_dir_all(dir)?;
            for (name, body) in &self.0 {
                fs::write(dir.join(name), body)?;
            }
        }
        Ok(())
    }
}

fn split(d: usize, c: usize) -> Run<Split> {
    Ok(Split::new(d, c)?)
}

/// An explicit seed, or a fresh one announced on stderr.
fn resolve_seed(seed: &mut Option<u64>) -> u64 {
    *seed.get_or_insert_with(|| {
        let s = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_nanos() as u64)
            .unwrap_or(0);
        eprintln!("seed={s}");
        s
    })
}

fn config_line(cmd: &Cmd) -> String {
    format!("# config={}\r\n", serde_json::to_string(cmd).expect("config serializes"))
}

fn csv_body(cmd: &Cmd, header: &[String], rows: Vec<Vec<String>>) -> Run<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
    w.write_record(header).map_err(|e| Failure::Io(e.to_string()))?;
    for r in rows {
        w.write_record(&r).map_err(|e| Failure::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::Io(e.to_string()))?;
    Ok(config_line(cmd) + &String::from_utf8(bytes).expect("csv is utf-8"))
}

fn json_body(cmd: &Cmd, mut v: Value) -> String {
    v.as_object_mut()
        .expect("summary is an object")
        .insert("config".into(), serde_json::to_value(cmd).expect("config serializes"));
    serde_json::to_string_pretty(&v).expect("json serializes") + "\n"
}

fn levy_target(s: Split) -> Option<f64> {
    match (s.d, s.c) {
        (1, 1) => Some(LEVY_1_1),
        (2, 1) => Some(LEVY_2_1),
        _ => None,
    }
}

fn cmd_bestapprox(cmd: &Cmd, a: &BestapproxArgs) -> Run<Outputs> {
    let s = split(a.d, a.c)?;
    let theta = match (&a.theta, a.seed) {
        (Some(spec), _) => ThetaMatrix::parse(s, spec)?,
        (None, Some(seed)) => sample_theta(s, a.bits, seed)?,
        (None, None) => return Err(Failure::Usage("one of --theta or --seed is required".into())),
    };
    let seq = match (a.engine.as_str(), a.qmax, a.count) {
        ("chain", Some(q), _) => chain_engine_to(&theta, q)?,
        ("chain", None, Some(n)) => chain_engine(&theta, n)?,
        ("scan", Some(q), _) => direct_scan(&theta, q)?,
        ("chain" | "scan", ..) => return Err(Failure::Usage("--qmax (or --count with the chain engine) is required".into())),
        (e, ..) => return Err(Failure::Usage(format!("unknown engine {e:?}"))),
    };
    let mut records = seq.records;
    if let Some(n) = a.count {
        records.truncate(n);
    }
    let mut header = vec!["n".to_string()];
    header.extend((1..=a.c).map(|j| format!("Q{j}")));
    header.extend((1..=a.d).map(|i| format!("P{i}")));
    header.extend(["q".to_string(), "r_sq".to_string()]);
    let rows = records
        .iter()
        .map(|r| {
            let mut row = vec![r.index.to_string()];
            row.extend(r.q_vec.iter().map(|x| x.to_string()));
            row.extend(r.p_vec.iter().map(|x| x.to_string()));
            row.extend([r.q_string(), fraction_string(&r.r_sq)]);
            row
        })
        .collect();
    let csv = csv_body(cmd, &header, rows)?;
    let json = json_body(cmd, json!({ "theta": theta.to_fraction_list(), "terminal": seq.terminal, "records": records }));
    Ok(Outputs(vec![("bestapprox.csv".into(), csv), ("bestapprox.json".into(), json)]))
}

fn cmd_levy(cmd: &Cmd, a: &TrialArgs, seed: u64) -> Run<Outputs> {
    let s = split(a.d, a.c)?;
    let est = levy_ergodic(s, a.trials, a.depth, a.bits, seed)?;
    let target = levy_target(s);
    let summary = json!({
        "seed": seed,
        "l_hat": est.l_hat,
        "l_star_hat": est.l_star_hat,
        "stderr": est.stderr,
        "stderr_star": est.stderr_star,
        "target": target,
        "abs_error": target.map(|t| (est.l_hat - t).abs()),
        "abs_error_star": target.map(|t| (est.l_star_hat * s.c as f64 / s.d as f64 - t).abs()),
        "duality_residual": est.duality_residual,
        "duality_stderr": est.duality_stderr,
        "resamples": est.resamples,
    });
    let header: Vec<String> = ["trial", "resamples", "l_hat", "l_star_hat"].map(String::from).into();
    let rows = est
        .per_trial
        .iter()
        .map(|t| vec![t.trial.to_string(), t.resamples.to_string(), format_time(t.l_hat), format_time(t.l_star_hat)])
        .collect();
    Ok(Outputs(vec![
        ("levy_summary.json".into(), json_body(cmd, summary)),
        ("levy_trials.csv".into(), csv_body(cmd, &header, rows)?),
    ]))
}

const CDF_GRID: usize = 200;

fn cmd_dist(cmd: &Cmd, a: &TrialArgs, seed: u64) -> Run<Outputs> {
    let s = split(a.d, a.c)?;
    let sample = bjw_empirical(s, a.trials, a.depth, a.bits, seed)?;
    let one_d = s.d == 1 && s.c == 1;
    let top = minkowski_bound(s.d, s.c).value();
    let oracle = |t: f64| if one_d { Some(bjw_oracle_cdf_1d(t)) } else { None };
    let rows = (0..=CDF_GRID)
        .map(|i| {
            let t = top * i as f64 / CDF_GRID as f64;
            vec![format_time(t), format_time(sample.ecdf.eval(t)), oracle(t).map(format_time).unwrap_or_default()]
        })
        .collect();
    let header: Vec<String> = ["t", "ecdf", "oracle"].map(String::from).into();
    let ks = if one_d { Some(ks_distance(&sample.ecdf, bjw_oracle_cdf_1d)?) } else { None };
    let xs = sample.ecdf.samples();
    let summary = json!({
        "seed": seed,
        "samples": xs.len(),
        "min": xs.first(),
        "max": xs.last(),
        "minkowski_bound": top,
        "mass_below_0_05": sample.ecdf.eval(0.05),
        "ks": ks,
        "support_violations": sample.support_violations,
        "minkowski_violations": sample.minkowski_violations,
        "resamples": sample.resamples,
    });
    let pooled = xs.iter().map(|x| vec![format_time(*x)]).collect();
    Ok(Outputs(vec![
        ("dist_cdf.csv".into(), csv_body(cmd, &header, rows)?),
        ("dist_summary.json".into(), json_body(cmd, summary)),
        ("dist_beta.csv".into(), csv_body(cmd, &["beta".to_string()], pooled)?),
    ]))
}

fn cmd_surface(cmd: &Cmd, a: &SurfaceArgs, seed: Option<u64>) -> Run<Outputs> {
    match a.d {
        1 => {
            let quad = surface_measure_1d_quadrature();
            let exact = 2.0 * LN_2;
            let lf = levy_closed_form_1d();
            let summary = json!({
                "mu_s_exact": exact,
                "mu_s_quadrature": quad,
                "abs_error": (quad - exact).abs(),
                "levy_closed_form": lf.value,
                "levy_zeta_form": lf.zeta_form,
            });
            Ok(Outputs(vec![("surface.json".into(), json_body(cmd, summary))]))
        }
        2 => {
            let seed = seed.expect("seed resolved for d = 2");
            let mc = surface_mc_2d(a.samples, seed, a.h_box)?;
            let summary = json!({
                "seed": seed,
                "mu_s_hat": mc.mu_s_hat,
                "stderr": mc.stderr,
                "accept_rate": mc.accept_rate,
                "samples": mc.samples,
                "discarded": mc.discarded,
                "h_box": mc.h_box,
                "implied_mu_l3": LEVY_2_1 * mc.mu_s_hat / 2.0,
            });
            let header: Vec<String> = ["sample", "accepted", "weight"].map(String::from).into();
            let rows = mc
                .trace
                .iter()
                .map(|r| vec![r.sample.to_string(), (r.accepted as u8).to_string(), format_time(r.weight)])
                .collect();
            Ok(Outputs(vec![
                ("surface.json".into(), json_body(cmd, summary)),
                ("surface_trace.csv".into(), csv_body(cmd, &header, rows)?),
            ]))
        }
        d => Err(Failure::Usage(format!("surface supports d = 1 or 2, got {d}"))),
    }
}

fn cmd_returnmap(cmd: &Cmd, a: &ReturnmapArgs, seed: u64) -> Run<Outputs> {
    let (rows, restarts) = return_map_orbit_1d(a.n, seed)?;
    let header: Vec<String> = [
        "k", "x", "y", "eps", "x_enum", "y_enum", "eps_enum", "x_explicit", "y_explicit", "eps_explicit", "tau", "delta",
        "visit_residual",
    ]
    .map(String::from)
    .into();
    let max_delta = rows.iter().map(|r| r.delta).fold(0.0, f64::max);
    let table = rows
        .iter()
        .enumerate()
        .map(|(k, r)| {
            vec![
                k.to_string(),
                format_time(r.start.x),
                format_time(r.start.y),
                r.start.eps.to_string(),
                format_time(r.enumerated.x),
                format_time(r.enumerated.y),
                r.enumerated.eps.to_string(),
                format_time(r.explicit.x),
                format_time(r.explicit.y),
                r.explicit.eps.to_string(),
                format_time(r.tau),
                format_time(r.delta),
                format_time(r.visit_residual),
            ]
        })
        .collect();
    let summary = json!({
        "seed": seed,
        "returns": rows.len(),
        "restarts": restarts,
        "max_delta": max_delta,
        "eps_agree": rows.iter().all(|r| r.eps_agree),
        "max_visit_residual": rows.iter().map(|r| r.visit_residual).fold(0.0, f64::max),
    });
    Ok(Outputs(vec![
        ("returnmap.csv".into(), csv_body(cmd, &header, table)?),
        ("returnmap_summary.json".into(), json_body(cmd, summary)),
    ]))
}

fn cmd_badk(cmd: &Cmd, a: &BadkArgs) -> Run<Outputs> {
    let (_, cert) = badk::run(a.steps, a.x_search_bound)?;
    let body = json_body(cmd, json!({ "certificate": cert }));
    Ok(Outputs(vec![("badk_certificate.json".into(), body)]))
}

/// The embedded config of a CSV or JSON output file.
fn read_config(path: &Path) -> Run<Cmd> {
    let text = fs::read_to_string(path)?;
    let bad = |m: String| Failure::Usage(format!("{}: {m}", path.display()));
    let raw: Value = if let Some(rest) = text.strip_prefix("# config=") {
        let line = rest.lines().next().unwrap_or_default();
        serde_json::from_str(line).map_err(|e| bad(e.to_string()))?
    } else {
        let doc: Value = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
        doc.get("config").cloned().ok_or_else(|| bad("no embedded config".into()))?
    };
    serde_json::from_value(raw).map_err(|e| bad(e.to_string()))
}

fn execute(mut cmd: Cmd, out_dir: Option<&Path>) -> Run<()> {
    // Seeds are fixed before the config is embedded, so every file is replayable.
    let seed = match &mut cmd {
        Cmd::Levy(a) | Cmd::Dist(a) => Some(resolve_seed(&mut a.seed)),
        Cmd::Returnmap(a) => Some(resolve_seed(&mut a.seed)),
        Cmd::Surface(a) if a.d == 2 => Some(resolve_seed(&mut a.seed)),
        _ => None,
    };
    let outputs = match &cmd {
        Cmd::Bestapprox(a) => cmd_bestapprox(&cmd, a)?,
        Cmd::Levy(a) => cmd_levy(&cmd, a, seed.unwrap())?,
        Cmd::Dist(a) => cmd_dist(&cmd, a, seed.unwrap())?,
        Cmd::Surface(a) => cmd_surface(&cmd, a, seed)?,
        Cmd::Returnmap(a) => cmd_returnmap(&cmd, a, seed.unwrap())?,
        Cmd::Badk(a) => cmd_badk(&cmd, a)?,
        Cmd::Replay { file } => return execute(read_config(file)?, out_dir),
    };
    outputs.write(out_dir)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out_dir = cli.out_dir.or_else(|| std::env::var_os("SDALAB_OUT_DIR").map(PathBuf::from));
    match execute(cli.cmd, out_dir.as_deref()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
