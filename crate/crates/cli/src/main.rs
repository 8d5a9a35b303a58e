//! `mumac`: runs simulations, parameter sweeps and the saturation model, and
//! writes the results as CSV and JSON.

mod settings;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use mumac_core::des::{self, Scheme};
use mumac_core::experiment::{self, compare, parse_kv, Comparison, Experiment, Scenario};
use mumac_core::parallel::Execution;

use settings::{apply, RunOptions};

#[derive(Parser, Debug)]
#[command(name = "mumac", version, about = "Down/up-link MU-MIMO MAC simulator and saturation model")]
struct Args {
    /// Flat key = value file; flags given on the command line win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// uni-mumac, li-mac or baseline.
    #[arg(long)]
    scheme: Option<String>,
    /// downlink-dominant, balanced, saturated or custom.
    #[arg(long)]
    scenario: Option<String>,
    /// Number of STAs.
    #[arg(long)]
    m: Option<String>,
    /// AP antennas.
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    cw: Option<String>,
    /// Second-round window, or `m` to follow the number of STAs.
    #[arg(long)]
    cw2nd: Option<String>,
    /// Per-STA offered load, e.g. 0.8Mbps.
    #[arg(long)]
    sta_load: Option<String>,
    /// AP offered load (custom scenario).
    #[arg(long)]
    ap_load: Option<String>,
    /// e.g. 60s, 500ms, 20000slots.
    #[arg(long)]
    horizon: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    replications: Option<String>,
    /// var:lo:hi:step over cw_2nd, m_stas or n_antennas.
    #[arg(long)]
    sweep: Option<String>,
    /// Add saturation-model columns.
    #[arg(long)]
    analytic: bool,
    /// Print per-point simulation vs model differences (implies --analytic).
    #[arg(long)]
    compare: bool,
    /// Output file. `.json` writes the full snapshot only; anything else
    /// writes CSV plus a `.json` snapshot next to it. Default: CSV on stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-event JSON lines for a single run.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// 0 = all cores, 1 = sequential.
    #[arg(long)]
    workers: Option<String>,
    /// Cap on A-MPDU subframes per AP destination (number or `full`).
    #[arg(long)]
    nf_ap: Option<String>,
    /// AP queue capacity (number or `full` for M²).
    #[arg(long)]
    q_ap: Option<String>,
    #[arg(long)]
    q_sta: Option<String>,
    /// Highest backoff stage; 0 keeps a fixed window.
    #[arg(long)]
    max_stage: Option<String>,
    /// Monte Carlo iterations for the second-round distribution.
    #[arg(long)]
    iterations: Option<String>,
}

impl Args {
    fn settings(&self) -> Vec<(&'static str, String)> {
        let pairs = [
            ("scheme", &self.scheme),
            ("scenario", &self.scenario),
            ("m", &self.m),
            ("n", &self.n),
            ("cw", &self.cw),
            ("cw2nd", &self.cw2nd),
            ("sta-load", &self.sta_load),
            ("ap-load", &self.ap_load),
            ("horizon", &self.horizon),
            ("seed", &self.seed),
            ("replications", &self.replications),
            ("sweep", &self.sweep),
            ("workers", &self.workers),
            ("nf-ap", &self.nf_ap),
            ("q-ap", &self.q_ap),
            ("q-sta", &self.q_sta),
            ("max-stage", &self.max_stage),
            ("iterations", &self.iterations),
        ];
        let mut out: Vec<(&'static str, String)> =
            pairs.into_iter().filter_map(|(k, v)| v.clone().map(|v| (k, v))).collect();
        if self.analytic {
            out.push(("analytic", "true".into()));
        }
        if self.compare {
            out.push(("compare", "true".into()));
        }
        out
    }
}

/// Failure split by exit code.
enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

fn config_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Config(e.into())
}

fn runtime_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Runtime(e.into())
}

fn classify(e: mumac_core::Error) -> Failure {
    match e {
        mumac_core::Error::InvalidConfig(_) | mumac_core::Error::InvalidArgument(_) => config_err(e),
        _ => runtime_err(e),
    }
}

fn build(args: &Args) -> Result<(Experiment, RunOptions), Failure> {
    let mut exp = Experiment::default();
    let mut opts = RunOptions::default();
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))
            .map_err(Failure::Config)?;
        for (k, v) in parse_kv(&text).map_err(config_err)? {
            apply(&mut exp, &mut opts, &k, &v).map_err(|e| config_err(anyhow::anyhow!("{}: {e}", path.display())))?;
        }
    }
    for (k, v) in args.settings() {
        apply(&mut exp, &mut opts, k, &v).map_err(|e| config_err(anyhow::anyhow!(e)))?;
    }
    if opts.compare {
        exp.analytic = true;
    }
    if exp.scenario != Scenario::Saturated && exp.sta_load <= 0.0 {
        return Err(config_err(anyhow::anyhow!("the {} scenario needs a positive --sta-load", exp.scenario)));
    }
    if exp.ap_load.is_some() && exp.scenario != Scenario::Custom {
        return Err(config_err(anyhow::anyhow!("--ap-load only applies to the custom scenario")));
    }
    if exp.analytic && (exp.scenario != Scenario::Saturated || exp.base.scheme != Scheme::UniMumac) {
        return Err(config_err(anyhow::anyhow!("the saturation model covers saturated uni-mumac runs only")));
    }
    exp.points().map_err(classify)?;
    Ok((exp, opts))
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("results");
    path.with_file_name(format!("{stem}{suffix}"))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .with_context(|| format!("creating {}", path.display()))
        .map_err(Failure::Runtime)
}

fn print_comparison(c: &Comparison) {
    eprintln!(
        "{:>4} {:>2} {:>4} {:>7} {:>12} {:>12} {:>8} {:>12} {:>12} {:>8}",
        "m", "n", "cw", "cw_2nd", "sim_down", "model_down", "rel", "sim_up", "model_up", "rel"
    );
    for r in &c.rows {
        eprintln!(
            "{:>4} {:>2} {:>4} {:>7} {:>12.0} {:>12.0} {:>8.4} {:>12.0} {:>12.0} {:>8.4}",
            r.m, r.n, r.cw, r.cw_2nd, r.left_s_down, r.right_s_down, r.rel_down, r.left_s_up, r.right_s_up, r.rel_up
        );
    }
    eprintln!("max relative difference {:.4}, mean {:.4}", c.max_rel, c.mean_rel);
}

fn execute(args: &Args) -> Result<(), Failure> {
    let (exp, opts) = build(args)?;
    let exec = Execution::from_workers(opts.workers);

    if let Some(trace_path) = &args.trace {
        if exp.sweep.is_some() || exp.replications != 1 {
            return Err(config_err(anyhow::anyhow!("--trace needs a single run (no sweep, one replication)")));
        }
        let cfg = exp.points().map_err(classify)?.remove(0);
        let mut w = create(trace_path)?;
        let report = des::run_traced(&cfg, &mut w).map_err(classify)?;
        w.flush().map_err(runtime_err)?;
        eprintln!("{}: S_down {:.0} bit/s, S_up {:.0} bit/s", cfg.summary(), report.s_down, report.s_up);
    }

    let output = experiment::run_sweep(&exp, exec).map_err(classify)?;
    let comparison = if opts.compare {
        let c = compare(&output.records, &output.analytic).map_err(classify)?;
        print_comparison(&c);
        Some(c)
    } else {
        None
    };

    match &args.out {
        None => {
            let stdout = io::stdout();
            experiment::write_csv(&output.records, stdout.lock()).map_err(classify)?;
        }
        Some(path) if path.extension().is_some_and(|e| e == "json") => {
            let mut w = create(path)?;
            experiment::write_json(&output, &mut w).map_err(classify)?;
            w.flush().map_err(runtime_err)?;
        }
        Some(path) => {
            let mut w = create(path)?;
            experiment::write_csv(&output.records, &mut w).map_err(classify)?;
            w.flush().map_err(runtime_err)?;
            let mut j = create(&sibling(path, ".json"))?;
            experiment::write_json(&output, &mut j).map_err(classify)?;
            j.flush().map_err(runtime_err)?;
            if !output.analytic.is_empty() {
                let mut a = create(&sibling(path, ".analytic.csv"))?;
                experiment::write_csv(&output.analytic, &mut a).map_err(classify)?;
                a.flush().map_err(runtime_err)?;
            }
            if let Some(c) = &comparison {
                let mut w = create(&sibling(path, ".compare.csv"))?;
                experiment::write_csv(&c.rows, &mut w).map_err(classify)?;
                w.flush().map_err(runtime_err)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
