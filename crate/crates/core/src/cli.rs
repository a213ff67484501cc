//! The `laplace` command-line front end.
//!
//! Exit codes: 0 on success, 1 on input or computation errors (with a
//! one-line `error:` diagnostic on stderr), 2 when `--strict` turns a
//! hypothesis check into a failure.

use std::ffi::OsString;
use std::io::Write;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::asymptotic::{self, log_gamma};
use crate::conditions::{self, ConditionReport, Status};
use crate::proofmirror::{self, WindowDiagnostics};
use crate::quadrature::{self, ProblemOptions, ProblemSpec, RatioRow};
use crate::CriticalPoint;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_STRICT: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "laplace", version, about = "Laplace-method estimates of ∫ phi(x) exp(n h(x)) dx")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Locate the maximizer of h and print the leading-order estimate.
    Approx(ProblemArgs),
    /// Compare the estimate against oracle quadrature over a list of n.
    Verify(ProblemArgs),
    /// Split the integral at xi0 ± ε and check each estimate of the argument.
    Prooftrace(ProblemArgs),
    /// Sample-based checks of the hypotheses on phi and h.
    Check(ProblemArgs),
    /// n! eⁿ n^(-n-1/2) against sqrt(2π).
    DemoStirling(DemoArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ProblemArgs {
    /// Amplitude phi(x).
    #[arg(long, allow_hyphen_values = true)]
    pub phi: String,
    /// Exponent h(x).
    #[arg(long, allow_hyphen_values = true)]
    pub h: String,
    /// Lower limit; `-inf` allowed.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_ext_real)]
    pub a: f64,
    /// Upper limit; `inf` allowed.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_ext_real)]
    pub b: f64,
    #[command(flatten)]
    pub n: NArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct DemoArgs {
    #[command(flatten)]
    pub n: NArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Default, Args)]
#[group(multiple = false)]
pub struct NArgs {
    /// Single value of n (positive)
    #[arg(long)]
    pub n: Option<u64>,
    /// Comma-separated, strictly ascending
    #[arg(long, value_delimiter = ',')]
    pub n_list: Option<Vec<u64>>,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Machine-readable output
    #[arg(long)]
    pub json: bool,
    /// Exit 2 when a check fails
    #[arg(long)]
    pub strict: bool,
    /// Relative tolerance of the oracle quadrature
    #[arg(long, default_value = "1e-10")]
    pub rel_tol: f64,
    /// Absolute tolerance of the oracle quadrature
    #[arg(long, default_value = "1e-300")]
    pub abs_tol: f64,
    /// Highest derivative order tried when h''(xi0) vanishes
    #[arg(long, default_value = "8", value_parser = parse_max_order)]
    pub max_order: usize,
}

/// `inf`, `-inf` or a finite decimal number.
pub fn parse_ext_real(s: &str) -> Result<f64, String> {
    match s.trim() {
        "inf" | "+inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        t => match t.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(format!("`{s}` is not a number, `inf` or `-inf`")),
        },
    }
}

fn parse_max_order(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(k) if k >= 2 && k % 2 == 0 => Ok(k),
        _ => Err(format!("`{s}` is not an even integer >= 2")),
    }
}

impl NArgs {
    fn list(&self) -> Option<Vec<u64>> {
        self.n_list.clone().or_else(|| self.n.map(|n| vec![n]))
    }

    fn require(&self) -> Result<Vec<u64>, crate::Error> {
        let ns = self
            .list()
            .ok_or_else(|| crate::Error::InvalidArgument("one of --n or --n-list is required".into()))?;
        if ns.is_empty() || ns.contains(&0) {
            return Err(crate::Error::InvalidArgument("n values must be at least 1".into()));
        }
        Ok(ns)
    }
}

impl ProblemArgs {
    pub fn spec(&self) -> Result<ProblemSpec, crate::Error> {
        let c = &self.common;
        let options = ProblemOptions {
            rel_tol: c.rel_tol,
            abs_tol: c.abs_tol,
            max_order: c.max_order,
            ..ProblemOptions::default()
        };
        if !(self.a < self.b) {
            return Err(crate::Error::InvalidArgument(format!(
                "need a < b, got a = {}, b = {}",
                self.a, self.b
            )));
        }
        let phi = crate::expr::parse(&self.phi)?;
        let h = crate::expr::parse(&self.h)?;
        ProblemSpec::with_options(phi, h, self.a, self.b, options)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ApproxReport {
    pub n: u64,
    pub xi0: f64,
    pub m: u32,
    pub d2m: f64,
    pub h0: f64,
    pub sign: i8,
    /// `log |A_n|`.
    pub log_estimate: f64,
    /// `A_n` itself when it fits in a double.
    pub estimate: Option<f64>,
}

pub fn approx(ps: &ProblemSpec, cp: &CriticalPoint, n: u64) -> Result<ApproxReport, crate::Error> {
    let est = asymptotic::laplace_estimate(&ps.phi, cp, n)?;
    Ok(ApproxReport {
        n,
        xi0: cp.xi0,
        m: cp.m,
        d2m: cp.d2m,
        h0: cp.h0,
        sign: est.value.sign,
        log_estimate: est.value.log_mag,
        estimate: est.value.to_f64().ok(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyRow {
    pub n: u64,
    pub log_i: f64,
    pub log_a: f64,
    pub ratio: f64,
    pub abs_ratio_minus_1: f64,
    pub converged: bool,
}

impl From<RatioRow> for VerifyRow {
    fn from(r: RatioRow) -> VerifyRow {
        VerifyRow {
            n: r.n,
            log_i: r.log_i,
            log_a: r.log_a,
            ratio: r.ratio,
            abs_ratio_minus_1: (r.ratio - 1.0).abs(),
            converged: r.converged,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StirlingRow {
    pub n: u64,
    /// `log n!`.
    pub log_factorial: f64,
    /// `n! eⁿ n^(-n-1/2)`.
    pub value: f64,
    /// `value / sqrt(2π)`.
    pub ratio: f64,
}

pub fn demo_stirling(ns: &[u64]) -> Result<Vec<StirlingRow>, crate::Error> {
    let root = (2.0 * std::f64::consts::PI).sqrt();
    ns.iter()
        .map(|&n| {
            let nf = n as f64;
            let lf = log_gamma(nf + 1.0)?;
            let value = (lf + nf - (nf + 0.5) * nf.ln()).exp();
            Ok(StirlingRow {
                n,
                log_factorial: lf,
                value,
                ratio: value / root,
            })
        })
        .collect()
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_ERROR,
            };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    match dispatch(&cli.command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {}", one_line(&e.to_string()));
            EXIT_ERROR
        }
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn io(e: std::io::Error) -> crate::Error {
    crate::Error::InvalidArgument(format!("write failed: {e}"))
}

fn emit_json<T: Serialize + ?Sized>(out: &mut dyn Write, v: &T) -> Result<(), crate::Error> {
    let s = crate::json::to_string(v).map_err(|e| crate::Error::InvalidArgument(e.to_string()))?;
    writeln!(out, "{s}").map_err(io)
}

/// Advisory checks: warnings on stderr, `true` when something hard-failed.
fn advisory(ps: &ProblemSpec, cp: &CriticalPoint, err: &mut dyn Write) -> Result<bool, crate::Error> {
    let report = conditions::check_conditions(ps, cp)?;
    for (name, c) in report.conditions() {
        if c.status != Status::Pass {
            let status = if c.status == Status::Warn { "warn" } else { "fail" };
            writeln!(err, "warning: {name} {status}: {}", c.detail).map_err(io)?;
        }
    }
    Ok(report.worst() == Status::Fail)
}

fn dispatch(cmd: &Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, crate::Error> {
    match cmd {
        Command::Approx(args) => {
            let ns = args.n.require()?;
            let ps = args.spec()?;
            let cp = ps.critical_point()?;
            let reports = ns
                .iter()
                .map(|&n| approx(&ps, &cp, n))
                .collect::<Result<Vec<_>, _>>()?;
            let failed = advisory(&ps, &cp, err)?;
            if args.common.json {
                if args.n.n.is_some() {
                    emit_json(out, &reports[0])?;
                } else {
                    emit_json(out, &reports)?;
                }
            } else {
                for r in &reports {
                    write_approx(out, r).map_err(io)?;
                }
            }
            Ok(strict_code(args.common.strict && failed))
        }
        Command::Verify(args) => {
            let ns = args.n.require()?;
            let ps = args.spec()?;
            let cp = ps.critical_point()?;
            let rows: Vec<VerifyRow> = quadrature::ratio_table(&ps, &cp, &ns)?
                .into_iter()
                .map(VerifyRow::from)
                .collect();
            let failed = advisory(&ps, &cp, err)?;
            if args.common.json {
                emit_json(out, &rows)?;
            } else {
                write_verify(out, &rows).map_err(io)?;
            }
            Ok(strict_code(args.common.strict && failed))
        }
        Command::Prooftrace(args) => {
            let ns = args.n.require()?;
            let ps = args.spec()?;
            let cp = ps.critical_point()?;
            let traces = proofmirror::trace_ladder(&ps, &cp, &ns)?;
            let failed = advisory(&ps, &cp, err)?;
            if args.common.json {
                if args.n.n.is_some() {
                    emit_json(out, &traces[0])?;
                } else {
                    emit_json(out, &traces)?;
                }
            } else {
                for t in &traces {
                    write_trace(out, t).map_err(io)?;
                }
            }
            let flags_failed = traces.iter().any(|t| !t.flags.all());
            Ok(strict_code(args.common.strict && (failed || flags_failed)))
        }
        Command::Check(args) => {
            let ps = args.spec()?;
            let cp = ps.critical_point()?;
            let report = conditions::check_conditions(&ps, &cp)?;
            if args.common.json {
                emit_json(out, &report)?;
            } else {
                write_check(out, &report).map_err(io)?;
            }
            Ok(strict_code(args.common.strict && report.worst() != Status::Pass))
        }
        Command::DemoStirling(args) => {
            let ns = args.n.list().unwrap_or_else(|| vec![10, 100, 1000]);
            if ns.contains(&0) {
                return Err(crate::Error::InvalidArgument("n values must be at least 1".into()));
            }
            let rows = demo_stirling(&ns)?;
            if args.common.json {
                emit_json(out, &rows)?;
            } else {
                write_stirling(out, &rows).map_err(io)?;
            }
            Ok(EXIT_OK)
        }
    }
}

fn strict_code(fail: bool) -> i32 {
    if fail {
        EXIT_STRICT
    } else {
        EXIT_OK
    }
}

fn write_approx(out: &mut dyn Write, r: &ApproxReport) -> std::io::Result<()> {
    writeln!(out, "n            = {}", r.n)?;
    writeln!(out, "xi0          = {:.17e}", r.xi0)?;
    writeln!(out, "m            = {}", r.m)?;
    writeln!(out, "d2m          = {:.17e}", r.d2m)?;
    writeln!(out, "h0           = {:.17e}", r.h0)?;
    writeln!(out, "sign         = {}", r.sign)?;
    writeln!(out, "log_estimate = {:.17e}", r.log_estimate)?;
    match r.estimate {
        Some(v) => writeln!(out, "estimate     = {v:.17e}"),
        None => writeln!(out, "estimate     = (outside double range)"),
    }
}

fn write_verify(out: &mut dyn Write, rows: &[VerifyRow]) -> std::io::Result<()> {
    writeln!(
        out,
        "{:>10}  {:>24}  {:>24}  {:>22}  {:>12}",
        "n", "log I_n", "log A_n", "ratio", "|ratio-1|"
    )?;
    for r in rows {
        let mark = if r.converged { "" } else { "  (not converged)" };
        writeln!(
            out,
            "{:>10}  {:>24.16e}  {:>24.16e}  {:>22.16}  {:>12.4e}{mark}",
            r.n, r.log_i, r.log_a, r.ratio, r.abs_ratio_minus_1
        )?;
    }
    Ok(())
}

fn pass(b: bool) -> &'static str {
    if b {
        "pass"
    } else {
        "FAIL"
    }
}

fn write_trace(out: &mut dyn Write, t: &WindowDiagnostics) -> std::io::Result<()> {
    writeln!(out, "n = {}, m = {}, epsilon = {:.10e}", t.n, t.m, t.epsilon)?;
    writeln!(out, "  left_tail        {:.10e}", t.left_tail)?;
    writeln!(out, "  center           {:.10e}", t.center)?;
    writeln!(out, "  right_tail       {:.10e}", t.right_tail)?;
    writeln!(out, "  full             {:.10e}", t.full)?;
    writeln!(out, "  surrogate_center {:.10e}", t.surrogate_center)?;
    writeln!(out, "  target           {:.10e}  (rel error {:.3e})", t.target, t.final_rel_error)?;
    writeln!(
        out,
        "  [{}] derivative bracket: ratio in [{:.6}, {:.6}]",
        pass(t.flags.derivative_bracket),
        t.bracket.min_ratio,
        t.bracket.max_ratio
    )?;
    writeln!(
        out,
        "  [{}] tail bound: {:.4e} <= C n^(5/(6m)-1) = {:.4e}  (C = {:.6})",
        pass(t.flags.tail_bound),
        t.tail.lhs,
        t.tail.rhs,
        t.tail.c
    )?;
    writeln!(
        out,
        "  [{}] |p - q| <= {:.4e}: max {:.4e}",
        pass(t.flags.pointwise_gap),
        t.gap.pq_bound,
        t.gap.max_pq
    )?;
    writeln!(
        out,
        "  [{}] left + center + right = full",
        pass(t.flags.additivity)
    )?;
    writeln!(out, "  [{}] quadrature converged", pass(t.flags.converged))?;
    writeln!(
        out,
        "  sup_gap {:.4e}  (|p-q|/n {:.4e}, n|p-q| {:.4e})",
        t.sup_gap, t.gap.paper_bound_a, t.gap.paper_bound_b
    )?;
    writeln!(out, "  r {:.6e}  deficit {:.4e}  tail_bound {:.4e}", t.r, t.deficit, t.tail_bound)
}

fn write_check(out: &mut dyn Write, r: &ConditionReport) -> std::io::Result<()> {
    for (name, c) in r.conditions() {
        let status = match c.status {
            Status::Pass => "pass",
            Status::Warn => "warn",
            Status::Fail => "fail",
        };
        match c.worst_witness {
            Some(w) => writeln!(out, "{name} {status}: {} (witness x = {w:.10e})", c.detail)?,
            None => writeln!(out, "{name} {status}: {}", c.detail)?,
        }
    }
    Ok(())
}

fn write_stirling(out: &mut dyn Write, rows: &[StirlingRow]) -> std::io::Result<()> {
    writeln!(out, "{:>10}  {:>22}  {:>22}", "n", "n! e^n n^(-n-1/2)", "ratio to sqrt(2pi)")?;
    for r in rows {
        writeln!(out, "{:>10}  {:>22.16}  {:>22.16}", r.n, r.value, r.ratio)?;
    }
    Ok(())
}
