//! Command-line surface: identified-set sweeps over delta, independence
//! checks on propensity files, oracle verification, and the numerical
//! illustration reproduction.
//!
//! Exit codes: 0 pass, 1 check/assertion failure, 2 usage or input error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qindep::bounds::{att_set, qtt_set, IdentifiedSet};
use qindep::error::Error;
use qindep::independence::{
    check_mean_independence, check_t_independence, check_u_independence, monotonicity_report,
    IndependenceSpec, Verdict,
};
use qindep::observables::{ingest_samples, read_csv, ObservedJoint, TruncNormDgp};
use qindep::oracle::verify_bounds;
use qindep::propensity::GridPropensity;

#[derive(Parser)]
#[command(
    name = "qindep",
    about = "Sharp identified sets for ATT and QTT under quantile-independence relaxations"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sweep identified sets over delta for T/U = [delta, 1-delta]
    Bounds(BoundsArgs),
    /// Check a propensity file against an independence spec
    Check(CheckArgs),
    /// Certify the analytic bound formulas against the LP oracle
    Verify(VerifyArgs),
    /// Emit the QTT(0.5) and ATT sweep CSVs and assert the anchor values
    ReproduceFigure4(Fig4Args),
}

#[derive(Args, Default)]
struct BoundsArgs {
    /// flat key=value config file; flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// read (y,x) samples from a CSV file instead of the built-in dgp
    #[arg(long)]
    csv: Option<PathBuf>,
    /// use the built-in truncated-normal dgp (the default source)
    #[arg(long)]
    dgp: bool,
    /// comma-separated delta values in [0, 0.5]
    #[arg(long)]
    delta_grid: Option<String>,
    /// comma-separated subset of {att, qtt}
    #[arg(long)]
    param: Option<String>,
    /// comma-separated subset of {t, u}
    #[arg(long)]
    spec: Option<String>,
    /// QTT quantile level
    #[arg(long)]
    q: Option<f64>,
    /// tabulation knots for the dgp curves
    #[arg(long)]
    n_knots: Option<usize>,
    /// grid cells for oracle-facing operations
    #[arg(long)]
    n_cells: Option<usize>,
    /// output CSV path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    /// GridPropensity JSON file: {"n": N, "values": [...]}
    #[arg(long)]
    propensity: PathBuf,
    /// comma-separated quantile levels for a finite T
    #[arg(long)]
    t_points: Option<String>,
    /// T-interval as "a,b"
    #[arg(long)]
    t_interval: Option<String>,
    /// U-interval as "a,b"
    #[arg(long)]
    u_interval: Option<String>,
    /// check mean independence
    #[arg(long)]
    mean: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// "t" or "u"
    #[arg(long)]
    spec: String,
    #[arg(long)]
    a: f64,
    #[arg(long)]
    b: f64,
    #[arg(long, default_value_t = 0.5)]
    p_x: f64,
    #[arg(long, default_value_t = 1000)]
    n_cells: usize,
}

#[derive(Args)]
struct Fig4Args {
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 4096)]
    n_knots: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Bounds(args) => cmd_bounds(args),
        Cmd::Check(args) => cmd_check(args),
        Cmd::Verify(args) => cmd_verify(args),
        Cmd::ReproduceFigure4(args) => cmd_reproduce_figure4(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

/// Format with 6 significant digits; `inf` / `-inf` for unbounded endpoints.
fn fmt_sig(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let mag = x.abs().log10().floor() as i32;
    let dec = (5 - mag).max(0) as usize;
    let s = format!("{x:.dec$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

struct SweepConfig {
    source: Source,
    delta_grid: Vec<f64>,
    params: Vec<String>,
    specs: Vec<String>,
    q: f64,
    n_knots: usize,
    out: Option<PathBuf>,
    dgp: TruncNormDgp,
}

enum Source {
    Dgp,
    Csv(PathBuf),
}

fn parse_list(s: &str) -> Result<Vec<f64>, Error> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| Error::Argument(format!("bad number `{t}`: {e}")))
        })
        .collect()
}

fn default_delta_grid() -> Vec<f64> {
    (0..=100).map(|i| 0.5 * i as f64 / 100.0).collect()
}

fn load_sweep_config(args: &BoundsArgs) -> Result<SweepConfig, Error> {
    let mut cfg = SweepConfig {
        source: Source::Dgp,
        delta_grid: default_delta_grid(),
        params: vec!["att".into(), "qtt".into()],
        specs: vec!["t".into(), "u".into()],
        q: 0.5,
        n_knots: 4096,
        out: None,
        dgp: TruncNormDgp::default(),
    };
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path)?;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                msg: format!("expected key=value, got `{line}`"),
            })?;
            let value = value.trim();
            let bad = |e: String| Error::Parse { line: i + 1, msg: e };
            match key.trim() {
                "csv" => cfg.source = Source::Csv(PathBuf::from(value)),
                "dgp" => cfg.source = Source::Dgp,
                "delta_grid" => cfg.delta_grid = parse_list(value).map_err(|e| bad(e.to_string()))?,
                "param" => cfg.params = value.split(',').map(|s| s.trim().to_lowercase()).collect(),
                "spec" => cfg.specs = value.split(',').map(|s| s.trim().to_lowercase()).collect(),
                "q" => cfg.q = value.parse().map_err(|e| bad(format!("bad q: {e}")))?,
                "n_knots" => cfg.n_knots = value.parse().map_err(|e| bad(format!("bad n_knots: {e}")))?,
                "n_cells" => { let _: usize = value.parse().map_err(|e| bad(format!("bad n_cells: {e}")))?; }
                "out" => cfg.out = Some(PathBuf::from(value)),
                "gamma" => cfg.dgp.gamma = value.parse().map_err(|e| bad(format!("bad gamma: {e}")))?,
                "pi" => cfg.dgp.pi = value.parse().map_err(|e| bad(format!("bad pi: {e}")))?,
                "p1" => cfg.dgp.p1 = value.parse().map_err(|e| bad(format!("bad p1: {e}")))?,
                other => return Err(bad(format!("unknown key `{other}`"))),
            }
        }
    }
    if let Some(csv) = &args.csv {
        cfg.source = Source::Csv(csv.clone());
    } else if args.dgp {
        cfg.source = Source::Dgp;
    }
    if let Some(g) = &args.delta_grid {
        cfg.delta_grid = parse_list(g)?;
    }
    if let Some(p) = &args.param {
        cfg.params = p.split(',').map(|s| s.trim().to_lowercase()).collect();
    }
    if let Some(s) = &args.spec {
        cfg.specs = s.split(',').map(|s| s.trim().to_lowercase()).collect();
    }
    if let Some(q) = args.q {
        cfg.q = q;
    }
    if let Some(n) = args.n_knots {
        cfg.n_knots = n;
    }
    if let Some(out) = &args.out {
        cfg.out = Some(out.clone());
    }
    for &d in &cfg.delta_grid {
        if !(0.0..=0.5).contains(&d) {
            return Err(Error::Argument(format!("delta = {d} outside [0, 0.5]")));
        }
    }
    if !(cfg.q > 0.0 && cfg.q < 1.0) {
        return Err(Error::Argument(format!("q = {} not in (0,1)", cfg.q)));
    }
    let mut sorted = cfg.delta_grid.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cfg.delta_grid = sorted;
    Ok(cfg)
}

fn build_observed(cfg: &SweepConfig) -> Result<ObservedJoint, Error> {
    match &cfg.source {
        Source::Dgp => cfg.dgp.to_observed(cfg.n_knots),
        Source::Csv(path) => {
            let file = fs::File::open(path)?;
            let rows = read_csv(file)?;
            ingest_samples(&rows)
        }
    }
}

fn spec_for(delta: f64, is_u: bool) -> IndependenceSpec {
    let (a, b) = (delta, 1.0 - delta);
    if is_u {
        IndependenceSpec::u_interval(a, b)
    } else {
        IndependenceSpec::t_interval(a, b)
    }
}

fn sweep_rows(cfg: &SweepConfig, obs: &ObservedJoint) -> Result<Vec<String>, Error> {
    let mut rows = vec!["delta,param,spec,lo,hi".to_string()];
    for &delta in &cfg.delta_grid {
        for param in &cfg.params {
            for spec_name in &cfg.specs {
                let is_u = match spec_name.as_str() {
                    "t" => false,
                    "u" => true,
                    other => return Err(Error::Argument(format!("unknown spec `{other}`"))),
                };
                let spec = spec_for(delta, is_u);
                let set: IdentifiedSet = match param.as_str() {
                    "att" => att_set(&spec, obs)?,
                    "qtt" => qtt_set(cfg.q, &spec, obs)?,
                    other => return Err(Error::Argument(format!("unknown param `{other}`"))),
                };
                if set.lo.is_infinite() || set.hi.is_infinite() {
                    eprintln!("warning: unbounded identified set at delta = {delta}");
                }
                rows.push(format!(
                    "{},{},{},{},{}",
                    fmt_sig(delta),
                    param.to_uppercase(),
                    spec_name.to_uppercase(),
                    fmt_sig(set.lo),
                    fmt_sig(set.hi)
                ));
            }
        }
    }
    Ok(rows)
}

fn cmd_bounds(args: BoundsArgs) -> Result<ExitCode, Error> {
    let cfg = load_sweep_config(&args)?;
    let obs = build_observed(&cfg)?;
    let rows = sweep_rows(&cfg, &obs)?;
    let text = rows.join("\n") + "\n";
    match &cfg.out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn parse_interval(s: &str) -> Result<(f64, f64), Error> {
    let vals = parse_list(s)?;
    if vals.len() != 2 {
        return Err(Error::Argument(format!("expected `a,b`, got `{s}`")));
    }
    Ok((vals[0], vals[1]))
}

fn cmd_check(args: CheckArgs) -> Result<ExitCode, Error> {
    let text = fs::read_to_string(&args.propensity)?;
    let p: GridPropensity = serde_json::from_str(&text)
        .map_err(|e| Error::Parse { line: e.line(), msg: e.to_string() })?;
    let p = GridPropensity::new(p.values)?;

    let report = monotonicity_report(&p);
    println!("{}", serde_json::to_string(&report).expect("report serializes"));

    let verdict = if args.mean {
        let (pass, cov) = check_mean_independence(&p);
        if pass {
            Verdict::Pass
        } else {
            Verdict::Fail { t1: 0.0, t2: 1.0, average: cov, expected: 0.0 }
        }
    } else if let Some(ts) = &args.t_points {
        check_t_independence(&p, &IndependenceSpec::t_points(parse_list(ts)?))?
    } else if let Some(iv) = &args.t_interval {
        let (a, b) = parse_interval(iv)?;
        check_t_independence(&p, &IndependenceSpec::t_interval(a, b))?
    } else if let Some(iv) = &args.u_interval {
        let (a, b) = parse_interval(iv)?;
        check_u_independence(&p, &IndependenceSpec::u_interval(a, b))?
    } else {
        return Err(Error::Argument(
            "pick one of --t-points, --t-interval, --u-interval, --mean".into(),
        ));
    };
    println!("{}", serde_json::to_string(&verdict).expect("verdict serializes"));
    Ok(if verdict.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_verify(args: VerifyArgs) -> Result<ExitCode, Error> {
    let spec = match args.spec.to_lowercase().as_str() {
        "t" => IndependenceSpec::t_interval(args.a, args.b),
        "u" => IndependenceSpec::u_interval(args.a, args.b),
        other => return Err(Error::Argument(format!("unknown spec `{other}`"))),
    };
    let report = verify_bounds(&spec, args.p_x, args.n_cells)?;
    println!("{}", serde_json::to_string(&report).expect("report serializes"));
    Ok(if report.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_reproduce_figure4(args: Fig4Args) -> Result<ExitCode, Error> {
    let obs = TruncNormDgp::default().to_observed(args.n_knots)?;
    let cfg_base = |params: Vec<String>| SweepConfig {
        source: Source::Dgp,
        delta_grid: default_delta_grid(),
        params,
        specs: vec!["t".into(), "u".into()],
        q: 0.5,
        n_knots: args.n_knots,
        out: None,
        dgp: TruncNormDgp::default(),
    };
    fs::create_dir_all(&args.out_dir)?;
    for (file, param) in [("figure4_qtt.csv", "qtt"), ("figure4_att.csv", "att")] {
        let cfg = cfg_base(vec![param.to_string()]);
        let rows = sweep_rows(&cfg, &obs)?;
        let path: &Path = &args.out_dir.join(file);
        let mut f = fs::File::create(path)?;
        f.write_all((rows.join("\n") + "\n").as_bytes())?;
        println!("wrote {}", path.display());
    }

    // anchor assertions, tolerance 0.01
    let mut failures = Vec::new();
    let mut expect = |name: &str, got: f64, want: f64| {
        if (got - want).abs() > 0.01 {
            failures.push(format!("{name}: got {got}, expected {want}"));
        }
    };
    let att_t = att_set(&spec_for(0.5, false), &obs)?;
    expect("ATT/T delta=0.5 lo", att_t.lo, -1.0);
    expect("ATT/T delta=0.5 hi", att_t.hi, 3.0);
    let att_u = att_set(&spec_for(0.5, true), &obs)?;
    expect("ATT/U delta=0.5 lo", att_u.lo, -3.0);
    expect("ATT/U delta=0.5 hi", att_u.hi, 5.0);
    for i in 0..=50 {
        let delta = 0.25 + 0.25 * i as f64 / 50.0;
        let qtt_u = qtt_set(0.5, &spec_for(delta, true), &obs)?;
        expect(&format!("QTT/U delta={delta} lo"), qtt_u.lo, -3.0);
        expect(&format!("QTT/U delta={delta} hi"), qtt_u.hi, 5.0);
    }
    for i in 0..=100 {
        let delta = 0.5 * i as f64 / 100.0;
        let qtt_t = qtt_set(0.5, &spec_for(delta, false), &obs)?;
        expect(&format!("QTT/T delta={delta} lo"), qtt_t.lo, 1.0);
        expect(&format!("QTT/T delta={delta} hi"), qtt_t.hi, 1.0);
    }
    if failures.is_empty() {
        println!("all anchor values match");
        Ok(ExitCode::SUCCESS)
    } else {
        for f in &failures {
            eprintln!("anchor mismatch: {f}");
        }
        Ok(ExitCode::from(1))
    }
}
