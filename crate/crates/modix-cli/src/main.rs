use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use modix::chern_index::LevelSum;
use modix::derived_lp::{property_suite, PropertyReport, SuiteConfig};
use modix::parallel::{self, Exec};
use modix::podles_triple::{gen_a, gen_b, podles_summability, PodlesTriple};
use modix::qscalar::QContext;
use modix::suq2_triple::{self as suq2, SUq2Triple, SummabilityReport};
use modix::twisted_cyclic::{Chain, Twist};
use modix::{checks, sample, Error};
use serde::Serialize;
use serde_json::{json, Value};

#[derive(Parser, Debug)]
#[command(name = "modix", version, about = "Twisted index experiments for quantum SU(2) and the Podleś sphere")]
struct Cli {
    /// Deformation parameter in (0, 1).
    #[arg(long, global = true, default_value_t = 0.5)]
    q: f64,
    /// Requested floating precision in bits.
    #[arg(long, global = true, env = "MODIX_PRECISION", default_value_t = 106)]
    precision: u32,
    /// Relative singular-value threshold for kernel extraction.
    #[arg(long, global = true, default_value_t = 1e-7)]
    svd_threshold: f64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// Run every data-parallel loop on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Space {
    Suq2,
    Podles,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Suite {
    Lp,
    Cyclic,
    Rep,
}

#[derive(Args, Debug)]
struct SpinArgs {
    /// Spins `l` as `0`, `1/2`, `1`, `0.5`, comma separated.
    #[arg(long, value_delimiter = ',', value_parser = parse_spin, default_value = "0,1/2,1")]
    spin: Vec<u32>,
    /// Column cutoff in doubled-spin units.
    #[arg(long, default_value_t = 40)]
    cutoff: i32,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Twisted index of `P u^l P` against the closed form.
    Index(SpinArgs),
    /// Half Chern pairing against the numerical index.
    Pair(SpinArgs),
    /// Transgression residuals `Ch^1 - Lambda - Xi b` on random word pairs.
    Local {
        #[arg(long, default_value_t = 40)]
        cutoff: i32,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Longest generator word.
        #[arg(long, default_value_t = 3)]
        max_len: usize,
    },
    /// Truncated `Tr(R)` against the closed form.
    TraceR {
        #[arg(long, default_value_t = 80)]
        cutoff: i32,
    },
    /// Level terms of the weighted `|D|^{-p}` trace.
    Summability {
        #[arg(value_enum)]
        space: Space,
        #[arg(long, default_value_t = 1.0)]
        p: f64,
        #[arg(long, default_value_t = 60)]
        cutoff: i32,
    },
    /// Property suites.
    Check {
        #[arg(value_enum)]
        suite: Suite,
        /// Largest matrix dimension for `lp`.
        #[arg(long, default_value_t = 6)]
        dim: usize,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Cutoff for `rep`.
        #[arg(long, default_value_t = 30)]
        cutoff: i32,
        /// Grid points for the flow suprema in `lp`.
        #[arg(long, default_value_t = 200)]
        grid: usize,
    },
    /// Even Chern evaluations on the Podleś sphere.
    PodlesChern {
        #[arg(long, default_value_t = 30)]
        cutoff: i32,
        #[arg(long, default_value_t = 12)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn parse_spin(s: &str) -> Result<u32, String> {
    let l = match s.split_once('/') {
        Some((n, d)) => {
            let n: f64 = n.trim().parse().map_err(|_| format!("bad spin {s}"))?;
            let d: f64 = d.trim().parse().map_err(|_| format!("bad spin {s}"))?;
            n / d
        }
        None => s.trim().parse().map_err(|_| format!("bad spin {s}"))?,
    };
    let l2 = 2.0 * l;
    if l < 0.0 || (l2 - l2.round()).abs() > 1e-12 {
        return Err(format!("spin {s} is not a nonnegative half-integer"));
    }
    Ok(l2.round() as u32)
}

#[derive(Debug, Serialize)]
struct Report {
    label: String,
    inputs: BTreeMap<String, Value>,
    values: BTreeMap<String, f64>,
    closed_form: Option<f64>,
    abs_err: Option<f64>,
    tail_estimate: Option<f64>,
    stable: bool,
}

impl Report {
    fn new(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            inputs: BTreeMap::new(),
            values: BTreeMap::new(),
            closed_form: None,
            abs_err: None,
            tail_estimate: None,
            stable: true,
        }
    }

    fn input(mut self, k: &str, v: impl Into<Value>) -> Self {
        self.inputs.insert(k.into(), v.into());
        self
    }

    fn value(mut self, k: &str, v: f64) -> Self {
        self.values.insert(k.into(), v + 0.0);
        self
    }

    fn closed(mut self, closed: f64, numeric: f64) -> Self {
        self.closed_form = Some(closed);
        self.abs_err = Some((numeric - closed).abs());
        self
    }

    fn level_sum(self, key: &str, v: &LevelSum) -> Self {
        let mut r = self.value(key, v.extrapolated).value(&format!("{key}_partial"), v.value);
        r.tail_estimate = Some(v.tail_estimate);
        r.value(&format!("{key}_extrapolation_error"), v.extrapolation_error)
    }
}

#[derive(Debug, Serialize)]
struct Payload {
    command: String,
    q: f64,
    precision: u32,
    status: &'static str,
    diagnostic: Option<String>,
    reports: Vec<Report>,
}

fn exit_for(e: &Error) -> u8 {
    match e {
        Error::InvalidConfig(_)
        | Error::InsufficientCutoff { .. }
        | Error::OutsideSubalgebra(_)
        | Error::SizeMismatch(_)
        | Error::Parity { .. }
        | Error::DegreeZero => 2,
        _ => 3,
    }
}

fn spin_reports(ctx: &QContext, args: &SpinArgs, pair: bool) -> modix::Result<Vec<Report>> {
    let runs = suq2::run_experiment(&args.spin, ctx, args.cutoff)?;
    Ok(runs
        .iter()
        .zip(&args.spin)
        .map(|(r, &l2)| {
            let i = &r.index;
            let base = Report::new(format!("u^{}", suq2::spin_label(l2)))
                .input("spin", suq2::spin_label(l2))
                .input("cutoff", args.cutoff)
                .input("svd_threshold", ctx.svd_threshold);
            let mut rep = if pair {
                let mut rep = base
                    .value("half_pairing", r.half_pairing)
                    .value("half_pairing_partial", r.half_pairing_partial)
                    .value("pairing_extrapolation_error", r.pairing_extrapolation_error)
                    .value("index_numeric", i.index_numeric)
                    .value("index_vs_pairing", r.index_vs_pairing);
                rep.tail_estimate = Some(r.pairing_tail);
                rep.stable = i.stable && r.pairing_extrapolation_error.is_finite();
                rep
            } else {
                let mut rep = base
                    .value("index_numeric", i.index_numeric)
                    .value("psi_trace", i.psi_trace)
                    .value("phi_trace", i.phi_trace)
                    .value("kernel_dim_u", i.kernel_dims[0] as f64)
                    .value("kernel_dim_u_star", i.kernel_dims[1] as f64)
                    .value("sigma_zero_max", i.sigma_zero_max)
                    .value("centralizer_residual", i.centralizer_residual);
                rep.stable = i.stable;
                rep
            };
            if let Some(c) = i.index_closed {
                let numeric = if pair { r.half_pairing } else { i.index_numeric };
                rep = rep.closed(c, numeric);
            }
            rep
        })
        .collect())
}

fn local_reports(ctx: &QContext, cutoff: i32, trials: usize, seed: u64, max_len: usize) -> modix::Result<Vec<Report>> {
    let triple = SUq2Triple::new(ctx, cutoff)?;
    let pairs = sample::word_pairs(seed, trials, max_len, ctx.s);
    let res = triple.transgression_scan(&pairs)?;
    Ok(pairs
        .iter()
        .zip(res)
        .enumerate()
        .map(|(k, ((x, y), t))| {
            let mut r = Report::new(format!("pair{k}"))
                .input("x", format!("{x:?}"))
                .input("y", format!("{y:?}"))
                .input("cutoff", cutoff)
                .input("seed", seed)
                .value("chern", t.chern)
                .value("local", t.local)
                .value("xi", t.xi)
                .value("residual", t.residual)
                .value("partial_residual", t.partial_residual)
                .value("normal_form_residual", t.normal_form_residual)
                .value("extrapolation_error", t.extrapolation_error);
            r.tail_estimate = Some(t.tail_estimate);
            r.stable = t.extrapolation_error.is_finite();
            r
        })
        .collect())
}

fn summability_reports(space: &str, rep: &SummabilityReport) -> Vec<Report> {
    let ratios: BTreeMap<i32, f64> = rep.ratios.iter().copied().collect();
    let mut out: Vec<Report> = rep
        .levels
        .iter()
        .zip(&rep.partial_sums)
        .enumerate()
        .map(|(l2, (t, s))| {
            let mut r = Report::new(format!("l2={l2}"))
                .input("space", space)
                .input("p", rep.p)
                .input("cutoff", rep.cutoff)
                .value("term", *t)
                .value("partial_sum", *s);
            if let Some(x) = ratios.get(&(l2 as i32)) {
                r = r.value("ratio", *x);
            }
            r
        })
        .collect();
    let last_ratio = rep.ratios.last().map_or(f64::NAN, |r| r.1);
    let mut total = Report::new("total")
        .input("space", space)
        .input("p", rep.p)
        .input("cutoff", rep.cutoff)
        .value("partial_sum", rep.partial_sums.last().copied().unwrap_or(0.0))
        .value("last_ratio", last_ratio);
    total.tail_estimate = Some(rep.tail_estimate);
    total.stable = rep.partial_sums.iter().all(|x| x.is_finite());
    out.push(total);
    out
}

fn property_reports(suite: &str, reps: &[PropertyReport], inputs: &[(&str, Value)]) -> Vec<Report> {
    reps.iter()
        .map(|p| {
            let mut r = Report::new(p.name.clone()).input("suite", suite);
            for (k, v) in inputs {
                r = r.input(k, v.clone());
            }
            r.value("trials", p.trials as f64)
                .value("violations", p.violations as f64)
                .value("worst", p.worst)
                .value("passed", if p.passed() { 1.0 } else { 0.0 })
        })
        .collect()
}

fn rep_reports(r: &checks::RepReport, trials: usize, seed: u64) -> Vec<Report> {
    let base = |label: &str| Report::new(label).input("suite", "rep").input("cutoff", r.cutoff).input("trials", trials).input("seed", seed);
    let mut out = Vec::new();
    for (kind, rels) in [("pi", &r.pi_relations), ("rho", &r.rho_relations)] {
        let mut rep = base(&format!("{kind}_relations"));
        for (name, v) in rels {
            rep = rep.value(name, *v);
        }
        out.push(rep.value("max", rels.iter().map(|x| x.1).fold(0.0, f64::max)));
    }
    out.push(base("pi_unitarity").value("residual", r.pi_unitarity));
    out.push(base("intertwining").value("residual", r.intertwining));
    let mut decay = base("decay");
    for (g, v) in &r.decay {
        decay = decay.value(&format!("ratio_{g}"), *v);
    }
    out.push(decay);
    out
}

fn podles_reports(ctx: &QContext, cutoff: i32, trials: usize, seed: u64) -> modix::Result<Vec<Report>> {
    let t = PodlesTriple::new(ctx, cutoff)?;
    let s = ctx.s;
    let (a, b, bs) = (gen_a(s), gen_b(s), gen_b(s).star());
    let mut out = Vec::new();
    for (label, x) in [("A,B,B*", [&a, &b, &bs]), ("B,B*,A", [&b, &bs, &a]), ("B*,A,B", [&bs, &a, &b]), ("A,B*,B", [&a, &bs, &b])] {
        let v = t.chern2(x[0], x[1], x[2])?;
        let mut r = Report::new(label).input("cutoff", cutoff).level_sum("chern2", &v);
        r.stable = v.extrapolation_error.is_finite();
        out.push(r);
    }
    let triples = sample::sphere_chains(seed, trials, 3, 2, s);
    let twist = Twist::podles_imag(1);
    let residuals = parallel::try_map(ctx.exec, triples, |slots| -> modix::Result<(f64, f64)> {
        let ch = Chain::tensor(1.0, &slots)?.reduce();
        let x = t.chern2_chain(&ch)?;
        let y = t.chern2_chain(&ch.lambda(&twist))?;
        Ok(((x.extrapolated - y.extrapolated).abs(), 1.0 + x.extrapolated.abs()))
    })?;
    let worst = residuals.iter().map(|(d, sc)| d / sc).fold(0.0, f64::max);
    out.push(Report::new("lambda_invariance").input("cutoff", cutoff).input("trials", trials).input("seed", seed).value("relative_residual", worst));
    let quads = sample::sphere_chains(seed ^ 0x9e37, trials, 4, 2, s);
    let boundary = parallel::try_map(ctx.exec, quads, |slots| -> modix::Result<f64> {
        let b = Chain::tensor(1.0, &slots)?.twisted_b(&twist)?.reduce();
        let v = t.chern2_chain(&b)?;
        Ok(v.extrapolated.abs() / (1.0 + v.levels.iter().map(|x| x.abs()).sum::<f64>()))
    })?;
    out.push(
        Report::new("boundary")
            .input("cutoff", cutoff)
            .input("trials", trials)
            .input("seed", seed)
            .value("relative_residual", boundary.iter().copied().fold(0.0, f64::max)),
    );
    Ok(out)
}

fn run(cli: &Cli, ctx: &QContext) -> modix::Result<Vec<Report>> {
    match &cli.command {
        Command::Index(a) => spin_reports(ctx, a, false),
        Command::Pair(a) => spin_reports(ctx, a, true),
        Command::Local { cutoff, trials, seed, max_len } => local_reports(ctx, *cutoff, *trials, *seed, *max_len),
        Command::TraceR { cutoff } => {
            let tr = suq2::trace_r(ctx, *cutoff)?;
            let mut r = Report::new("Tr(R)").input("cutoff", *cutoff).level_sum("trace", &tr).closed(suq2::trace_r_closed(ctx.q), tr.value);
            r.stable = tr.tail_estimate.is_finite();
            Ok(vec![r])
        }
        Command::Summability { space, p, cutoff } => Ok(match space {
            Space::Suq2 => summability_reports("suq2", &suq2::summability_scan(*p, ctx, *cutoff)?),
            Space::Podles => summability_reports("podles", &podles_summability(*p, ctx, *cutoff)?),
        }),
        Command::Check { suite, dim, trials, seed, cutoff, grid } => match suite {
            Suite::Lp => {
                let cfg = SuiteConfig { trials: *trials, max_dim: *dim, seed: *seed, grid: *grid, exec: ctx.exec, ..SuiteConfig::default() };
                let reps = property_suite(&cfg)?;
                Ok(property_reports("lp", &reps, &[("dim", json!(dim)), ("trials", json!(trials)), ("seed", json!(seed)), ("slack", json!(cfg.slack))]))
            }
            Suite::Cyclic => {
                let reps = checks::cyclic_suite(*trials, *seed, ctx.exec)?;
                Ok(property_reports("cyclic", &reps, &[("trials", json!(trials)), ("seed", json!(seed))]))
            }
            Suite::Rep => Ok(rep_reports(&checks::rep_suite(ctx, *cutoff, *trials, *seed)?, *trials, *seed)),
        },
        Command::PodlesChern { cutoff, trials, seed } => podles_reports(ctx, *cutoff, *trials, *seed),
    }
}

fn command_name(c: &Command) -> String {
    match c {
        Command::Index(_) => "index".into(),
        Command::Pair(_) => "pair".into(),
        Command::Local { .. } => "local".into(),
        Command::TraceR { .. } => "trace-r".into(),
        Command::Summability { space: Space::Suq2, .. } => "summability suq2".into(),
        Command::Summability { space: Space::Podles, .. } => "summability podles".into(),
        Command::Check { suite, .. } => format!("check {}", format!("{suite:?}").to_lowercase()),
        Command::PodlesChern { .. } => "podles-chern".into(),
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn render(p: &Payload, format: Format) -> std::io::Result<Vec<u8>> {
    match format {
        Format::Json => {
            let mut v = serde_json::to_vec_pretty(p)?;
            v.push(b'\n');
            Ok(v)
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["command", "label", "inputs", "quantity", "value", "closed_form", "abs_err", "tail_estimate", "stable"])?;
            for r in &p.reports {
                let inputs = serde_json::to_string(&r.inputs)?;
                for (k, v) in &r.values {
                    w.write_record([
                        p.command.as_str(),
                        &r.label,
                        &inputs,
                        k,
                        &v.to_string(),
                        &fmt_opt(r.closed_form),
                        &fmt_opt(r.abs_err),
                        &fmt_opt(r.tail_estimate),
                        &r.stable.to_string(),
                    ])?;
                }
            }
            if let Some(d) = &p.diagnostic {
                w.write_record([p.command.as_str(), "diagnostic", "", p.status, d, "", "", "", "false"])?;
            }
            w.into_inner().map_err(|e| e.into_error())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut status = ("ok", 0u8, None);
    let reports = match QContext::with_precision(cli.q, cli.precision) {
        Ok(mut ctx) => {
            ctx.svd_threshold = cli.svd_threshold;
            if cli.sequential {
                ctx.exec = Exec::Sequential;
            }
            match run(&cli, &ctx) {
                Ok(r) => {
                    if r.iter().any(|x| !x.stable) {
                        status = ("unstable", 3, Some("at least one report is not stable".to_string()));
                    }
                    r
                }
                Err(e) => {
                    let code = exit_for(&e);
                    status = (if code == 2 { "invalid" } else { "unstable" }, code, Some(e.to_string()));
                    Vec::new()
                }
            }
        }
        Err(e) => {
            status = ("invalid", 2, Some(e.to_string()));
            Vec::new()
        }
    };
    let payload = Payload { command: command_name(&cli.command), q: cli.q, precision: cli.precision, status: status.0, diagnostic: status.2.clone(), reports };
    if let Some(d) = &status.2 {
        eprintln!("modix: {d}");
    }
    let bytes = match render(&payload, cli.format) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("modix: cannot render output: {e}");
            return ExitCode::from(1);
        }
    };
    let written = match &cli.output {
        Some(path) => std::fs::write(path, &bytes),
        None => std::io::stdout().write_all(&bytes),
    };
    if let Err(e) = written {
        eprintln!("modix: cannot write output: {e}");
        return ExitCode::from(1);
    }
    ExitCode::from(status.1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spins_parse() {
        assert_eq!(parse_spin("0"), Ok(0));
        assert_eq!(parse_spin("1/2"), Ok(1));
        assert_eq!(parse_spin("0.5"), Ok(1));
        assert_eq!(parse_spin("3/2"), Ok(3));
        assert!(parse_spin("1/3").is_err());
        assert!(parse_spin("-1").is_err());
        assert!(parse_spin("x").is_err());
    }

    #[test]
    fn cli_is_well_formed() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
