//! `merw simulate | expect | verify`.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use merw_core::harness::{TestReport, Verdict};

use crate::config::{self, ConfigError};
use crate::exec;
use crate::expect::{self, Inputs, Query};
use crate::output::{self, RunManifest};
use crate::suites::{self, Suite};

pub const EXIT_OK: i32 = 0;
pub const EXIT_TEST_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;
pub const EXIT_DOMAIN: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "merw",
    version,
    about = "Simulate and verify multidimensional elephant random walks"
)]
pub struct Cli {
    /// Emit machine-readable JSON on standard output.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a configured walk or ensemble and write CSV, JSON and a manifest.
    Simulate {
        /// JSON config, or a manifest from an earlier run.
        config: PathBuf,
        /// Override a config field, e.g. `--set walk.r=0.3`.
        #[arg(long = "set", value_name = "PATH=VALUE")]
        set: Vec<String>,
        /// Output directory.
        #[arg(long, default_value = "merw-out")]
        out: PathBuf,
    },
    /// Print closed-form quantities.
    Expect(ExpectArgs),
    /// Run a statistical verification suite.
    Verify {
        suite: Suite,
        /// Draw new seeds instead of the shipped ones.
        #[arg(long)]
        fresh_seed: bool,
        /// Use this master seed instead of the shipped one.
        #[arg(long, conflicts_with = "fresh_seed")]
        seed: Option<u64>,
        /// Directory for the report JSON.
        #[arg(long, default_value = "merw-reports")]
        out: PathBuf,
        /// Worker count (capped by MERW_THREADS).
        #[arg(long)]
        parallelism: Option<usize>,
    },
}

#[derive(Debug, Args)]
#[group(id = "query", required = true, multiple = false)]
pub struct QueryFlags {
    /// E(Z_n^*) from -r, -n.
    #[arg(long)]
    moves: bool,
    /// u_{n-1} = sum_{k<=n} 1/a_k^2 from -r, -n.
    #[arg(long)]
    upartial: bool,
    /// Growth regime and limit constant of u_n from -r.
    #[arg(long)]
    ulimit: bool,
    /// 3F2(1,1,1; 2-r, 2-r; 1) from -r (r < 1/2).
    #[arg(long)]
    hyp3f2: bool,
    /// m-th moment of the super-critical stops limit from -r, -m.
    #[arg(long)]
    moment: bool,
    /// Memory exponent gamma from -d, -p.
    #[arg(long)]
    gamma: bool,
    /// Critical memory parameter from -d.
    #[arg(long)]
    pcrit: bool,
    /// Regime table from -d, -p and optional -r, --mu, --eta, -b.
    #[arg(long)]
    regime: bool,
    /// tr<M>_n from -n, --mu1, --eta1, --mu, --eta.
    #[arg(long)]
    variation: bool,
}

impl QueryFlags {
    fn query(&self) -> Query {
        let table = [
            (self.moves, Query::Moves),
            (self.upartial, Query::UPartial),
            (self.ulimit, Query::ULimit),
            (self.hyp3f2, Query::Hyp3f2),
            (self.moment, Query::Moment),
            (self.gamma, Query::Gamma),
            (self.pcrit, Query::PCritical),
            (self.regime, Query::Regime),
            (self.variation, Query::Variation),
        ];
        table
            .iter()
            .find(|(on, _)| *on)
            .map(|(_, q)| *q)
            .expect("clap requires one query")
    }
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct ExpectArgs {
    #[command(flatten)]
    query: QueryFlags,
    #[arg(short = 'r')]
    r: Option<f64>,
    #[arg(short = 'n')]
    n: Option<usize>,
    #[arg(short = 'd')]
    d: Option<usize>,
    #[arg(short = 'p')]
    p: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    mu1: Option<f64>,
    #[arg(long)]
    eta1: Option<f64>,
    #[arg(short = 'b')]
    b: Option<f64>,
    #[arg(short = 'm')]
    m: Option<u32>,
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match cli.command {
        Command::Simulate { config, set, out } => simulate(&config, &set, &out, cli.json),
        Command::Expect(args) => expect_cmd(&args, cli.json),
        Command::Verify {
            suite,
            fresh_seed,
            seed,
            out,
            parallelism,
        } => verify(suite, fresh_seed, seed, &out, parallelism, cli.json),
    }
}

fn simulate(path: &std::path::Path, set: &[String], out: &std::path::Path, json: bool) -> i32 {
    let started_at = output::now_rfc3339();
    let cfg = match config::load(path, set) {
        Ok(c) => c,
        Err(e @ ConfigError::Read { .. }) => {
            eprintln!("error: {e}");
            return EXIT_RUNTIME;
        }
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let resolved = cfg.resolved(exec::default_parallelism());
    let ens_cfg = match resolved.to_ensemble(exec::default_parallelism()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let ens = match exec::run_ensemble(&ens_cfg) {
        Ok(e) => e,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_RUNTIME;
        }
    };
    let outputs = match output::write_run(out, &ens) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_RUNTIME;
        }
    };
    let manifest = RunManifest {
        tool: output::TOOL.into(),
        tool_version: output::TOOL_VERSION.into(),
        csv_schema: output::CSV_SCHEMA,
        master_seed: ens_cfg.master_seed,
        parallelism: exec::effective_parallelism(ens_cfg.parallelism),
        config: resolved,
        started_at,
        finished_at: output::now_rfc3339(),
        outputs,
    };
    if let Err(e) = output::write_json(&out.join(output::MANIFEST_FILE), &manifest) {
        eprintln!("error: {e}");
        return EXIT_RUNTIME;
    }
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&manifest).expect("manifest serializes")
        );
    } else {
        for o in &manifest.outputs {
            println!("{}  {}", o.sha256, out.join(&o.file).display());
        }
        println!("manifest: {}", out.join(output::MANIFEST_FILE).display());
    }
    EXIT_OK
}

fn expect_cmd(args: &ExpectArgs, json: bool) -> i32 {
    let inputs = Inputs {
        r: args.r,
        n: args.n,
        d: args.d,
        p: args.p,
        mu: args.mu,
        eta: args.eta,
        mu1: args.mu1,
        eta1: args.eta1,
        b: args.b,
        m: args.m,
    };
    match expect::evaluate(args.query.query(), &inputs) {
        Ok(rows) => {
            if json {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&rows).expect("rows serialize")
                );
            } else {
                let width = rows.iter().map(|r| r.name.len()).max().unwrap_or(0);
                let values: Vec<String> = rows.iter().map(|r| r.value.to_string()).collect();
                let vwidth = values.iter().map(String::len).max().unwrap_or(0);
                for (r, v) in rows.iter().zip(values) {
                    println!("{:width$}  {:vwidth$}  [{}]", r.name, v, r.citation);
                }
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                EXIT_USAGE
            } else {
                EXIT_DOMAIN
            }
        }
    }
}

fn verify(
    suite: Suite,
    fresh: bool,
    seed: Option<u64>,
    out: &std::path::Path,
    parallelism: Option<usize>,
    json: bool,
) -> i32 {
    let parallelism = parallelism.unwrap_or_else(exec::default_parallelism);
    let selected: Vec<Suite> = if suite == Suite::All {
        Suite::EACH.to_vec()
    } else {
        vec![suite]
    };
    let mut reports: Vec<TestReport> = Vec::new();
    for s in selected {
        let seed = if fresh {
            Some(rand::random::<u64>())
        } else {
            seed
        };
        match suites::run_suite(s, seed, parallelism) {
            Ok(r) => {
                if !json {
                    r.iter().for_each(print_report);
                }
                reports.extend(r);
            }
            Err(e) => {
                eprintln!("error: suite {}: {e}", s.name());
                return EXIT_RUNTIME;
            }
        }
    }
    let path = out.join(format!("verify-{}.json", suite.name()));
    if let Err(e) = std::fs::create_dir_all(out)
        .map_err(|e| e.to_string())
        .and_then(|_| output::write_json(&path, &reports).map_err(|e| e.to_string()))
    {
        eprintln!("error: {e}");
        return EXIT_RUNTIME;
    }
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&reports).expect("reports serialize")
        );
    } else {
        println!("reports: {}", path.display());
    }
    if reports.iter().any(TestReport::is_hard_failure) {
        EXIT_TEST_FAILURE
    } else {
        EXIT_OK
    }
}

fn verdict_label(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "PASS",
        Verdict::Fail => "FAIL",
        Verdict::Inconclusive => "INCONCLUSIVE",
    }
}

pub fn print_report(r: &TestReport) {
    let tag = if r.advisory { " (advisory)" } else { "" };
    let z = r
        .max_abs_z()
        .map(|z| format!(" max|z|={z:.3}"))
        .unwrap_or_default();
    let secs = r
        .runtime_secs
        .map(|s| format!(" {s:.1}s"))
        .unwrap_or_default();
    println!(
        "{:<12} {}{tag} seed={:#x}{z}{secs}",
        verdict_label(r.verdict),
        r.name,
        r.seed
    );
    for c in &r.checks {
        if c.verdict != Verdict::Pass || r.checks.len() <= 3 {
            let extra = match (c.std_error, c.p_value) {
                (_, Some(p)) => format!(" p={p:.4}"),
                (Some(se), None) => format!(" se={se:.3e}"),
                _ => String::new(),
            };
            println!(
                "    {:<12} {}: observed {:.6} vs {:.6}{extra}",
                verdict_label(c.verdict),
                c.label,
                c.observed,
                c.null_value
            );
        }
    }
    if let Some(reason) = &r.inconclusive_reason {
        println!("    {reason}");
    }
    for note in &r.notes {
        println!("    note: {note}");
    }
}
