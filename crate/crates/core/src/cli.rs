//! Batch command-line front end.
//!
//! Exit codes: 0 success, 2 usage, 3 parse, 4 verification or obstruction
//! negative, 5 search failure.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::hall::{generate_hall, validate_hall, witt_number, BracketTree, OrderPolicy};
use crate::numverify::{empirical_order, geometric_grid, Mode};
use crate::obstruction::{max_order_bound, w1_obstruction, w2_obstruction, wn_obstruction, Verdict};
use crate::scalar::{format_gauss, format_rational, gauss_to_c64, rational_to_f64, Rational};
use crate::scheme::{order_of_scheme, scheme_to_control, tokens, DiracControl, Scheme};
use crate::search::{solve, SearchOutcome, SearchSpec, SLOPE_SLACK};
use crate::systems::system_by_name;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_PARSE: i32 = 3;
pub const EXIT_NEGATIVE: i32 = 4;
pub const EXIT_SEARCH_FAILED: i32 = 5;

/// Largest truncation degree accepted on the command line.
pub const MAX_DEGREE: usize = 10;

/// Environment variable consulted when `search` gets no `--seed`.
pub const SEED_ENV: &str = "SPLITCTL_SEED";

#[derive(Debug, Parser)]
#[command(name = "splitctl", version, about = "Order conditions and construction of splitting schemes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StepMode {
    OneStep,
    MultiStep,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List a Hall basis and its per-degree Witt counts.
    Basis {
        #[arg(long, default_value_t = 2)]
        letters: usize,
        #[arg(long)]
        degree: usize,
        /// bstar or lyndon.
        #[arg(long, default_value = "bstar")]
        policy: String,
        /// Also write the basis in its reloadable text form.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Exact order of a scheme file, with the first failing coordinates.
    Order {
        scheme: PathBuf,
        #[arg(long, default_value_t = 6)]
        max_degree: usize,
        /// Exit 4 unless the order equals this.
        #[arg(long)]
        expect: Option<usize>,
    },
    /// Multi-start coefficient search from a spec file.
    Search {
        spec: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        restarts: Option<usize>,
        /// Where to write the scheme; printed to stdout otherwise.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Convergence table and fitted slope of a scheme on a test system.
    Verify {
        scheme: PathBuf,
        #[arg(long, default_value = "linearpair")]
        system: String,
        #[arg(long, value_enum, default_value_t = StepMode::OneStep)]
        mode: StepMode,
        /// Step sizes run from 2^-from down to 2^-to.
        #[arg(long, default_value_t = 3)]
        from: i32,
        #[arg(long, default_value_t = 12)]
        to: i32,
        /// Where to write the CSV; printed to stdout otherwise.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Exit 4 if the measured order falls short of this.
        #[arg(long)]
        expect: Option<usize>,
    },
    /// Coercivity obstruction on a control or scheme file, or an order bound for a flow set.
    Obstruct {
        /// Control (`horizon`/`impulse` lines) or scheme (`stage` lines) file.
        input: Option<PathBuf>,
        /// w1, w2, w3, ..., or wN together with --level.
        #[arg(long, default_value = "w1")]
        family: String,
        /// Level of the general family `wN`.
        #[arg(long)]
        level: Option<usize>,
        /// Comma-separated flows; defaults to the channels the control uses.
        #[arg(long, value_delimiter = ',')]
        flows: Vec<String>,
        /// Print the order bound implied by `--flows` instead of evaluating a control.
        #[arg(long)]
        bound: bool,
    },
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse { .. } => EXIT_PARSE,
        _ => EXIT_USAGE,
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Exact value followed by its decimal rendering.
pub fn dual(r: &Rational) -> String {
    format!("{} ({})", format_rational(r), rational_to_f64(r))
}

fn io(e: std::io::Error) -> Error {
    Error::Io(e.to_string())
}

/// Parses arguments and runs one subcommand, writing to the given streams.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

/// Entry point for the binary.
pub fn main() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}

fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Basis {
            letters,
            degree,
            policy,
            output,
        } => cmd_basis(letters, degree, &policy, output.as_deref(), out, err),
        Command::Order {
            scheme,
            max_degree,
            expect,
        } => cmd_order(&scheme, max_degree, expect, out),
        Command::Search {
            spec,
            seed,
            restarts,
            output,
        } => cmd_search(&spec, seed, restarts, output.as_deref(), out, err),
        Command::Verify {
            scheme,
            system,
            mode,
            from,
            to,
            csv,
            expect,
        } => cmd_verify(&scheme, &system, mode, (from, to), csv.as_deref(), expect, out),
        Command::Obstruct {
            input,
            family,
            level,
            flows,
            bound,
        } => cmd_obstruct(input.as_deref(), &family, level, &flows, bound, out),
    }
}

fn check_degree(d: usize) -> Result<()> {
    if d == 0 || d > MAX_DEGREE {
        return Err(Error::Config(format!("degree {d} outside 1..={MAX_DEGREE}")));
    }
    Ok(())
}

pub fn cmd_basis(
    letters: usize,
    degree: usize,
    policy: &str,
    output: Option<&Path>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32> {
    check_degree(degree)?;
    let policy: OrderPolicy = policy.parse()?;
    let basis = generate_hall(letters, degree, policy)?;
    writeln!(
        out,
        "# {} letters, degree <= {degree}, policy {}, {} elements",
        letters,
        basis.policy(),
        basis.len()
    )
    .map_err(io)?;
    for (i, b) in basis.elements().iter().enumerate() {
        writeln!(out, "{:>4} {}", i + 1, b).map_err(io)?;
    }
    writeln!(out, "degree witt count cumulative").map_err(io)?;
    let mut total = 0;
    for d in 1..=degree {
        let count = basis.count_in_degree(d);
        total += count;
        writeln!(out, "{d} {} {count} {total}", witt_number(letters, d)).map_err(io)?;
    }
    if let Some(p) = output {
        write_file(p, &basis.to_text())?;
    }
    let violations = validate_hall(&basis);
    let miscounted = (1..=degree).any(|d| basis.count_in_degree(d) != witt_number(letters, d));
    if !violations.is_empty() || miscounted {
        for v in &violations {
            writeln!(err, "violation: {v}").map_err(io)?;
        }
        if miscounted {
            writeln!(err, "per-degree counts differ from the Witt formula").map_err(io)?;
        }
        return Ok(EXIT_NEGATIVE);
    }
    Ok(EXIT_OK)
}

pub fn cmd_order(path: &Path, max_degree: usize, expect: Option<usize>, out: &mut dyn Write) -> Result<i32> {
    check_degree(max_degree)?;
    let scheme = Scheme::parse(&read(path)?)?;
    let report = order_of_scheme(&scheme, max_degree)?;
    writeln!(out, "{report}").map_err(io)?;
    for d in &report.defects {
        writeln!(
            out,
            "defect {}: {} ({}) target {}",
            d.bracket.label(),
            format_gauss(&d.value),
            fmt_c64(gauss_to_c64(&d.value)),
            format_gauss(&d.target)
        )
        .map_err(io)?;
    }
    Ok(match expect {
        Some(n) if n != report.order || (report.saturated && n > report.order) => EXIT_NEGATIVE,
        _ => EXIT_OK,
    })
}

fn fmt_c64(z: num_complex::Complex64) -> String {
    if z.im == 0.0 {
        format!("{}", z.re)
    } else {
        format!("{}{:+}i", z.re, z.im)
    }
}

pub fn cmd_search(
    path: &Path,
    seed: Option<u64>,
    restarts: Option<usize>,
    output: Option<&Path>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32> {
    let mut spec = SearchSpec::parse(&read(path)?)?;
    let env_seed = std::env::var(SEED_ENV).ok().and_then(|s| s.trim().parse().ok());
    if let Some(s) = seed.or(env_seed) {
        spec.seed = Some(s);
    }
    if let Some(r) = restarts {
        spec.restarts = r;
    }
    spec.validate()?;
    writeln!(out, "# seed {}", spec.effective_seed()).map_err(io)?;
    match solve(&spec)? {
        SearchOutcome::Found(res) => {
            writeln!(out, "# {}", res.summary()).map_err(io)?;
            match output {
                Some(p) => write_file(p, &res.scheme_text())?,
                None => out.write_all(res.scheme_text().as_bytes()).map_err(io)?,
            }
            Ok(EXIT_OK)
        }
        SearchOutcome::Failed(f) => {
            writeln!(err, "search failed: {f}").map_err(io)?;
            Ok(EXIT_SEARCH_FAILED)
        }
    }
}

pub fn cmd_verify(
    path: &Path,
    system: &str,
    mode: StepMode,
    (from, to): (i32, i32),
    csv: Option<&Path>,
    expect: Option<usize>,
    out: &mut dyn Write,
) -> Result<i32> {
    let scheme = Scheme::parse(&read(path)?)?;
    let sys = system_by_name(system)?;
    if from > to {
        return Err(Error::Config(format!("empty step range 2^-{from}..2^-{to}")));
    }
    let mode = match mode {
        StepMode::OneStep => Mode::OneStep,
        StepMode::MultiStep => Mode::MultiStep,
    };
    let report = empirical_order(
        &scheme.to_numeric(),
        sys.as_ref(),
        &geometric_grid(from, to),
        &sys.default_point(),
        mode,
    )?;
    match csv {
        Some(p) => write_file(p, &report.to_csv())?,
        None => out.write_all(report.to_csv().as_bytes()).map_err(io)?,
    }
    writeln!(out, "# {}", report.summary()).map_err(io)?;
    let short = match (expect, report.exact, report.order_estimate()) {
        (Some(_), true, _) | (None, _, _) => false,
        (Some(n), false, Some(o)) => o < n as f64 - SLOPE_SLACK,
        (Some(_), false, None) => true,
    };
    Ok(if short { EXIT_NEGATIVE } else { EXIT_OK })
}

fn is_control_text(text: &str) -> bool {
    text.lines()
        .filter_map(|l| tokens(l.split('#').next().unwrap_or("")).first().map(|t| t.1))
        .next()
        .is_some_and(|head| head == "horizon" || head == "impulse")
}

fn parse_family(family: &str, level: Option<usize>) -> Result<usize> {
    let lower = family.to_ascii_lowercase();
    if lower == "wn" {
        return level
            .filter(|n| *n >= 1)
            .ok_or_else(|| Error::Config("family wN needs --level N with N >= 1".into()));
    }
    lower
        .strip_prefix('w')
        .and_then(|n| n.parse::<usize>().ok())
        .filter(|n| *n >= 1)
        .ok_or_else(|| Error::Config(format!("unknown family `{family}`; expected w1, w2 or wN")))
}

pub fn cmd_obstruct(
    input: Option<&Path>,
    family: &str,
    level: Option<usize>,
    flows: &[String],
    bound: bool,
    out: &mut dyn Write,
) -> Result<i32> {
    let flows: Vec<BracketTree> = flows.iter().map(|f| f.parse()).collect::<Result<_>>()?;
    if bound {
        if flows.is_empty() {
            return Err(Error::Config("--bound needs --flows".into()));
        }
        match max_order_bound(&flows, MAX_DEGREE / 2) {
            Some(n) => writeln!(out, "max order {n}").map_err(io)?,
            None => writeln!(out, "no bound below order {MAX_DEGREE}").map_err(io)?,
        }
        return Ok(EXIT_OK);
    }
    let Some(path) = input else {
        return Err(Error::Config("an input file is required unless --bound is given".into()));
    };
    let text = read(path)?;
    let control = if is_control_text(&text) {
        DiracControl::parse(&text)?
    } else {
        scheme_to_control::<Rational>(&Scheme::parse(&text)?)?
    };
    let level = parse_family(family, level)?;
    let report = match level {
        1 if flows.is_empty() => w1_obstruction(&control)?,
        2 if flows.is_empty() => w2_obstruction(&control)?,
        n => {
            let flows = if flows.is_empty() { control.channels() } else { flows };
            wn_obstruction(&control, n, &flows)?
        }
    };
    write!(out, "{report}").map_err(io)?;
    writeln!(out, "coordinate side: {}", dual(&report.coordinate_value)).map_err(io)?;
    Ok(match report.verdict {
        Verdict::Obstructed => EXIT_OK,
        Verdict::HypothesesNotMet => EXIT_NEGATIVE,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("splitctl").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn basis_listing() {
        let (code, out, _) = run_capture(&["basis", "--letters", "2", "--degree", "5", "--policy", "bstar"]);
        assert_eq!(code, 0);
        let elems: Vec<&str> = out.lines().filter(|l| l.starts_with("  ")).collect();
        assert_eq!(elems.len(), 14);
        assert!(elems[13].ends_with(" X0"));
        let (_, out, _) = run_capture(&["basis", "--degree", "1"]);
        assert!(out.contains("   1 X1\n   2 X0\n"));
        let (code, _, _) = run_capture(&["basis", "--degree", "3", "--policy", "nope"]);
        assert_eq!(code, EXIT_USAGE);
        let (code, _, _) = run_capture(&["basis", "--degree", "11"]);
        assert_eq!(code, EXIT_USAGE);
    }

    #[test]
    fn usage_errors() {
        assert_eq!(run_capture(&["frobnicate"]).0, EXIT_USAGE);
        assert_eq!(run_capture(&["--help"]).0, EXIT_OK);
        assert_eq!(run_capture(&["obstruct", "--family", "q7", "--bound"]).0, EXIT_USAGE);
    }

    #[test]
    fn bound_query() {
        let (code, out, _) = run_capture(&["obstruct", "--bound", "--flows", "X1,W1"]);
        assert_eq!(code, 0);
        assert_eq!(out, "max order 4\n");
        let (_, out, _) = run_capture(&["obstruct", "--bound", "--flows", "X1"]);
        assert_eq!(out, "max order 2\n");
    }

    #[test]
    fn family_names() {
        assert_eq!(parse_family("w1", None).unwrap(), 1);
        assert_eq!(parse_family("W3", None).unwrap(), 3);
        assert_eq!(parse_family("wN", Some(4)).unwrap(), 4);
        assert!(parse_family("wN", None).is_err());
        assert!(parse_family("w0", None).is_err());
        assert!(is_control_text("# c\nhorizon 1\n"));
        assert!(!is_control_text("alpha-domain R+\nstage 1 X1 1\n"));
    }
}
