//! Scenarios, parameter sweeps, analytic/simulation comparison and tabular
//! output.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analytic::{saturation_throughput, ModelInputs, TauModel};
use crate::des::{self, Horizon, Report, Scheme, SimConfig, Traffic};
use crate::error::{invalid_config, Error, Result};
use crate::parallel::{par_map, Execution};
use crate::time::SimTime;

/// Columns that identify a sweep point: M, N, CW, CW_2nd, AP N_f.
pub type PointKey = (usize, u32, u32, u32, u32);

/// Bumped whenever a column is added, removed or renamed.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    /// AP load is four times the sum of the STA loads.
    DownlinkDominant,
    /// AP load equals the sum of the STA loads.
    Balanced,
    Saturated,
    /// AP load given explicitly.
    Custom,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::DownlinkDominant => "downlink-dominant",
            Scenario::Balanced => "balanced",
            Scenario::Saturated => "saturated",
            Scenario::Custom => "custom",
        }
    }

    /// Traffic for `m` STAs each offering `sta_load` bit/s.
    pub fn traffic(self, m: usize, sta_load: f64, ap_load: Option<f64>) -> Result<Traffic> {
        let total = sta_load * m as f64;
        Ok(match self {
            Scenario::Saturated => Traffic::Saturated,
            Scenario::DownlinkDominant => Traffic::Poisson { sta_load, ap_load: 4.0 * total },
            Scenario::Balanced => Traffic::Poisson { sta_load, ap_load: total },
            Scenario::Custom => Traffic::Poisson {
                sta_load,
                ap_load: ap_load.ok_or_else(|| invalid_config("the custom scenario needs an AP load"))?,
            },
        })
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "downlink-dominant" | "downlink" => Ok(Scenario::DownlinkDominant),
            "balanced" => Ok(Scenario::Balanced),
            "saturated" => Ok(Scenario::Saturated),
            "custom" => Ok(Scenario::Custom),
            _ => Err(invalid_config(format!("unknown scenario '{s}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVar {
    Cw2nd,
    MStas,
    NAntennas,
}

impl SweepVar {
    pub fn name(self) -> &'static str {
        match self {
            SweepVar::Cw2nd => "cw_2nd",
            SweepVar::MStas => "m_stas",
            SweepVar::NAntennas => "n_antennas",
        }
    }
}

impl FromStr for SweepVar {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "cw_2nd" | "cw2nd" | "cw2" => Ok(SweepVar::Cw2nd),
            "m_stas" | "m" | "stas" => Ok(SweepVar::MStas),
            "n_antennas" | "n" | "antennas" => Ok(SweepVar::NAntennas),
            _ => Err(invalid_config(format!("cannot sweep over '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub variable: SweepVar,
    pub values: Vec<u64>,
}

impl SweepSpec {
    /// Inclusive range `lo..=hi` in steps of `step`.
    pub fn range(variable: SweepVar, lo: u64, hi: u64, step: u64) -> Result<Self> {
        if step == 0 {
            return Err(invalid_config("sweep step must be positive"));
        }
        if lo > hi {
            return Err(invalid_config(format!("empty sweep range {lo}..{hi}")));
        }
        Ok(SweepSpec { variable, values: (lo..=hi).step_by(step as usize).collect() })
    }

    pub fn list(variable: SweepVar, values: Vec<u64>) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid_config("empty sweep"));
        }
        Ok(SweepSpec { variable, values })
    }
}

impl FromStr for SweepSpec {
    type Err = Error;

    /// `var:lo:hi:step`, `var:lo:hi` (step 1) or `var:v1,v2,...`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let num = |t: &str| t.parse::<u64>().map_err(|_| invalid_config(format!("bad number '{t}' in sweep '{s}'")));
        match parts.as_slice() {
            [var, list] => {
                let values = list.split(',').map(|t| num(t.trim())).collect::<Result<Vec<_>>>()?;
                SweepSpec::list(var.parse()?, values)
            }
            [var, lo, hi] => SweepSpec::range(var.parse()?, num(lo)?, num(hi)?, 1),
            [var, lo, hi, step] => SweepSpec::range(var.parse()?, num(lo)?, num(hi)?, num(step)?),
            _ => Err(invalid_config(format!("sweep must look like var:lo:hi:step, got '{s}'"))),
        }
    }
}

/// Everything needed to run one experiment: a base configuration, the
/// traffic rule, and optionally a swept parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub base: SimConfig,
    pub scenario: Scenario,
    /// Per-STA offered load, bit/s (ignored when saturated).
    pub sta_load: f64,
    /// Explicit AP load for the custom scenario.
    pub ap_load: Option<f64>,
    pub replications: u32,
    pub sweep: Option<SweepSpec>,
    /// Set CW_2nd to M at every point.
    #[serde(default)]
    pub cw_2nd_follows_m: bool,
    /// Attach saturation-model columns (saturated runs of the two-round
    /// scheme only).
    pub analytic: bool,
    pub n_iteration: u64,
    pub mc_seed: u64,
    pub tau_model: TauModel,
}

impl Default for Experiment {
    fn default() -> Self {
        Experiment {
            base: SimConfig::default(),
            scenario: Scenario::Saturated,
            sta_load: 0.0,
            ap_load: None,
            replications: 1,
            sweep: None,
            cw_2nd_follows_m: false,
            analytic: false,
            n_iteration: 100_000,
            mc_seed: 0x5eed,
            tau_model: TauModel::ClosedForm,
        }
    }
}

impl Experiment {
    /// Configuration of each sweep point, in order.
    pub fn points(&self) -> Result<Vec<SimConfig>> {
        if self.replications == 0 {
            return Err(invalid_config("replications must be at least 1"));
        }
        if self.cw_2nd_follows_m && self.sweep.as_ref().is_some_and(|s| s.variable == SweepVar::Cw2nd) {
            return Err(invalid_config("cannot sweep CW_2nd while it follows M"));
        }
        let values: Vec<Option<u64>> = match &self.sweep {
            Some(s) if s.values.is_empty() => return Err(invalid_config("empty sweep")),
            Some(s) => s.values.iter().copied().map(Some).collect(),
            None => vec![None],
        };
        values
            .into_iter()
            .map(|v| {
                let mut cfg = self.base.clone();
                if let (Some(v), Some(s)) = (v, &self.sweep) {
                    let v32 = u32::try_from(v).map_err(|_| invalid_config(format!("sweep value {v} too large")))?;
                    match s.variable {
                        SweepVar::Cw2nd => cfg.cw_2nd = v32,
                        SweepVar::MStas => cfg.m_stas = v as usize,
                        SweepVar::NAntennas => cfg.n_antennas = v32,
                    }
                }
                if self.cw_2nd_follows_m {
                    cfg.cw_2nd = u32::try_from(cfg.m_stas).map_err(|_| invalid_config("M too large"))?;
                }
                cfg.traffic = self.scenario.traffic(cfg.m_stas, self.sta_load, self.ap_load)?;
                cfg.validate()?;
                Ok(cfg)
            })
            .collect()
    }

    /// Model inputs matching a simulation configuration.
    pub fn model_inputs(&self, cfg: &SimConfig) -> ModelInputs {
        ModelInputs {
            m: cfg.m_stas,
            n: cfg.effective_antennas(),
            cw: cfg.cw,
            cw_2nd: cfg.cw_2nd,
            n_f: cfg.nf_ap_cap(),
            n_f_up: Some(cfg.nf_sta),
            timing: cfg.timing,
            n_iteration: self.n_iteration,
            alpha: None,
            mc_seed: self.mc_seed,
            tau_model: self.tau_model,
            execution: Execution::Sequential,
        }
    }

    fn analytic_applies(&self, cfg: &SimConfig) -> bool {
        self.analytic && cfg.scheme == Scheme::UniMumac && cfg.traffic == Traffic::Saturated
    }
}

/// One simulation run with its configuration echo.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub schema_version: u32,
    pub point: usize,
    pub replication: u32,
    pub scheme: String,
    pub scenario: String,
    pub m: usize,
    pub n: u32,
    pub cw: u32,
    pub cw_2nd: u32,
    pub nf_ap_cap: u32,
    pub nf_sta: u32,
    pub q_ap: usize,
    pub q_sta: usize,
    pub sta_load_bps: Option<f64>,
    pub ap_load_bps: Option<f64>,
    pub seed: u64,
    pub run_index: u64,
    pub sim_time_s: f64,
    pub s_down_bps: f64,
    pub s_up_bps: f64,
    pub s_total_bps: f64,
    /// Mean over frames.
    pub delay_ap_us: Option<f64>,
    pub delay_sta_us: Option<f64>,
    /// Mean over STAs of each STA's mean uplink delay.
    pub delay_sta_per_node_us: Option<f64>,
    pub p_r1_ap: Option<f64>,
    pub p_r1_sta: Option<f64>,
    pub p_r2: Option<f64>,
    pub tau_ap: Option<f64>,
    pub tau_sta: Option<f64>,
    pub delivered_ap: u64,
    pub delivered_sta: u64,
    pub generated_ap: u64,
    pub generated_sta: u64,
    pub drops_ap: u64,
    pub drops_sta: u64,
    pub r1_attempts_ap: u64,
    pub r1_collisions_ap: u64,
    pub r1_attempts_sta: u64,
    pub r1_collisions_sta: u64,
    pub r2_attempts: u64,
    pub r2_collisions: u64,
    pub virtual_slots: u64,
    pub analytic_s_down_bps: Option<f64>,
    pub analytic_s_up_bps: Option<f64>,
    pub analytic_p_collision: Option<f64>,
    pub analytic_tau: Option<f64>,
}

impl ResultRecord {
    pub fn new(point: usize, replication: u32, scenario: Scenario, cfg: &SimConfig, r: &Report) -> Self {
        let m = &r.metrics;
        let (sta_load, ap_load) = match cfg.traffic {
            Traffic::Saturated => (None, None),
            Traffic::Poisson { sta_load, ap_load } => (Some(sta_load), Some(ap_load)),
        };
        ResultRecord {
            schema_version: SCHEMA_VERSION,
            point,
            replication,
            scheme: cfg.scheme.name().to_string(),
            scenario: scenario.name().to_string(),
            m: cfg.m_stas,
            n: cfg.n_antennas,
            cw: cfg.cw,
            cw_2nd: cfg.cw_2nd,
            nf_ap_cap: cfg.nf_ap_cap(),
            nf_sta: cfg.nf_sta,
            q_ap: cfg.q_ap(),
            q_sta: cfg.q_sta,
            sta_load_bps: sta_load,
            ap_load_bps: ap_load,
            seed: cfg.seed,
            run_index: cfg.run_index,
            sim_time_s: r.sim_time,
            s_down_bps: r.s_down,
            s_up_bps: r.s_up,
            s_total_bps: r.s_total(),
            delay_ap_us: r.delay_ap,
            delay_sta_us: r.delay_sta,
            delay_sta_per_node_us: r.delay_sta_per_node,
            p_r1_ap: r.p_r1_ap,
            p_r1_sta: r.p_r1_sta,
            p_r2: r.p_r2,
            tau_ap: r.tau_ap,
            tau_sta: r.tau_sta,
            delivered_ap: m.delivered_ap,
            delivered_sta: m.delivered_sta,
            generated_ap: m.generated_ap,
            generated_sta: m.generated_sta,
            drops_ap: m.drops_ap,
            drops_sta: m.drops_sta,
            r1_attempts_ap: m.r1_attempts_ap,
            r1_collisions_ap: m.r1_collisions_ap,
            r1_attempts_sta: m.r1_attempts_sta,
            r1_collisions_sta: m.r1_collisions_sta,
            r2_attempts: m.r2_attempts,
            r2_collisions: m.r2_collisions,
            virtual_slots: m.virtual_slots,
            analytic_s_down_bps: None,
            analytic_s_up_bps: None,
            analytic_p_collision: None,
            analytic_tau: None,
        }
    }
}

/// Saturation-model output for one sweep point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyticRecord {
    pub schema_version: u32,
    pub point: usize,
    pub m: usize,
    pub n: u32,
    pub cw: u32,
    pub cw_2nd: u32,
    pub nf_ap_cap: u32,
    pub tau: f64,
    pub p_collision: f64,
    pub t_average_us: f64,
    pub e_2nd_slots_us: f64,
    pub mean_antennas: f64,
    pub s_down_bps: f64,
    pub s_up_bps: f64,
    pub mc_seed: u64,
    pub n_iteration: u64,
}

/// Rows that can be lined up for comparison.
pub trait Keyed {
    fn key(&self) -> PointKey;
    fn s_down(&self) -> f64;
    fn s_up(&self) -> f64;
}

impl Keyed for ResultRecord {
    fn key(&self) -> PointKey {
        (self.m, self.n, self.cw, self.cw_2nd, self.nf_ap_cap)
    }
    fn s_down(&self) -> f64 {
        self.s_down_bps
    }
    fn s_up(&self) -> f64 {
        self.s_up_bps
    }
}

impl Keyed for AnalyticRecord {
    fn key(&self) -> PointKey {
        (self.m, self.n, self.cw, self.cw_2nd, self.nf_ap_cap)
    }
    fn s_down(&self) -> f64 {
        self.s_down_bps
    }
    fn s_up(&self) -> f64 {
        self.s_up_bps
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub m: usize,
    pub n: u32,
    pub cw: u32,
    pub cw_2nd: u32,
    pub nf_ap_cap: u32,
    pub left_s_down: f64,
    pub right_s_down: f64,
    pub rel_down: f64,
    pub left_s_up: f64,
    pub right_s_up: f64,
    pub rel_up: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    pub max_rel: f64,
    pub mean_rel: f64,
}

/// |a − b| / |b|, with 0/0 read as agreement.
pub fn rel_diff(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs()
    }
}

/// Relative difference of every `left` key (replications averaged) against
/// the matching `right` row.
pub fn compare<L: Keyed, R: Keyed>(left: &[L], right: &[R]) -> Result<Comparison> {
    let mut groups: BTreeMap<PointKey, (f64, f64, usize)> = BTreeMap::new();
    for row in left {
        let g = groups.entry(row.key()).or_default();
        g.0 += row.s_down();
        g.1 += row.s_up();
        g.2 += 1;
    }
    let mut rows = Vec::with_capacity(groups.len());
    for (key, (down, up, count)) in groups {
        let r = right.iter().find(|r| r.key() == key).ok_or_else(|| {
            Error::KeyMismatch(format!(
                "no match for m={} n={} cw={} cw_2nd={} nf={}",
                key.0, key.1, key.2, key.3, key.4
            ))
        })?;
        let (down, up) = (down / count as f64, up / count as f64);
        rows.push(ComparisonRow {
            m: key.0,
            n: key.1,
            cw: key.2,
            cw_2nd: key.3,
            nf_ap_cap: key.4,
            left_s_down: down,
            right_s_down: r.s_down(),
            rel_down: rel_diff(down, r.s_down()),
            left_s_up: up,
            right_s_up: r.s_up(),
            rel_up: rel_diff(up, r.s_up()),
        });
    }
    if rows.is_empty() {
        return Err(Error::KeyMismatch("nothing to compare".into()));
    }
    let all: Vec<f64> = rows.iter().flat_map(|r| [r.rel_down, r.rel_up]).collect();
    Ok(Comparison {
        max_rel: all.iter().copied().fold(0.0, f64::max),
        mean_rel: all.iter().sum::<f64>() / all.len() as f64,
        rows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutput {
    pub schema_version: u32,
    pub experiment: Experiment,
    pub records: Vec<ResultRecord>,
    pub analytic: Vec<AnalyticRecord>,
}

/// Runs every (point, replication) pair. Rows come back ordered by point,
/// then replication, whatever order they finished in.
pub fn run_sweep(exp: &Experiment, exec: Execution) -> Result<ExperimentOutput> {
    let points = exp.points()?;
    let reps = exp.replications;
    let jobs: Vec<(usize, u32, SimConfig)> = points
        .iter()
        .enumerate()
        .flat_map(|(i, cfg)| {
            (0..reps).map(move |r| {
                let mut c = cfg.clone();
                c.run_index = cfg.run_index + (i as u64) * u64::from(reps) + u64::from(r);
                (i, r, c)
            })
        })
        .collect();

    let analytic_points: Vec<(usize, &SimConfig)> =
        points.iter().enumerate().filter(|(_, c)| exp.analytic_applies(c)).collect();
    let analytic: Vec<Result<AnalyticRecord>> = par_map(exec, &analytic_points, |&(i, cfg)| {
        let inputs = exp.model_inputs(cfg);
        let a = saturation_throughput(&inputs).map_err(|e| Error::RunFailed {
            index: i,
            config: cfg.summary(),
            source: Box::new(e),
        })?;
        Ok(AnalyticRecord {
            schema_version: SCHEMA_VERSION,
            point: i,
            m: inputs.m,
            n: cfg.n_antennas,
            cw: inputs.cw,
            cw_2nd: inputs.cw_2nd,
            nf_ap_cap: inputs.n_f,
            tau: a.tau,
            p_collision: a.p_collision,
            t_average_us: a.t_average,
            e_2nd_slots_us: a.e_2nd_slots,
            mean_antennas: a.second_round.mean_antennas(),
            s_down_bps: a.s_down,
            s_up_bps: a.s_up,
            mc_seed: inputs.mc_seed,
            n_iteration: inputs.n_iteration,
        })
    });
    let analytic = analytic.into_iter().collect::<Result<Vec<_>>>()?;

    let runs = par_map(exec, &jobs, |(i, r, cfg)| {
        des::run(cfg).map(|rep| ResultRecord::new(*i, *r, exp.scenario, cfg, &rep)).map_err(|e| Error::RunFailed {
            index: *i,
            config: cfg.summary(),
            source: Box::new(e),
        })
    });
    let mut records = runs.into_iter().collect::<Result<Vec<_>>>()?;
    for rec in &mut records {
        if let Some(a) = analytic.iter().find(|a| a.point == rec.point) {
            rec.analytic_s_down_bps = Some(a.s_down_bps);
            rec.analytic_s_up_bps = Some(a.s_up_bps);
            rec.analytic_p_collision = Some(a.p_collision);
            rec.analytic_tau = Some(a.tau);
        }
    }
    Ok(ExperimentOutput { schema_version: SCHEMA_VERSION, experiment: exp.clone(), records, analytic })
}

pub fn write_csv<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records<R: std::io::Read>(input: R) -> Result<Vec<ResultRecord>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub fn write_json<W: Write>(output: &ExperimentOutput, out: W) -> Result<()> {
    serde_json::to_writer_pretty(out, output)?;
    Ok(())
}

/// Parses `60s`, `500ms`, `250us`, `1000000ns`, `20000slots`; a bare number
/// is seconds.
pub fn parse_horizon(s: &str) -> Result<Horizon> {
    let s = s.trim();
    let split = s.find(|c: char| !(c.is_ascii_digit() || c == '.')).unwrap_or(s.len());
    let (num, unit) = s.split_at(split);
    let bad = || invalid_config(format!("bad horizon '{s}'"));
    let v: f64 = num.parse().map_err(|_| bad())?;
    if !(v.is_finite() && v > 0.0) {
        return Err(bad());
    }
    let t = |us: f64| Ok(Horizon::Time(SimTime::from_micros_f64(us)));
    match unit.trim() {
        "" | "s" => t(v * 1e6),
        "ms" => t(v * 1e3),
        "us" => t(v),
        "ns" => Ok(Horizon::Time(SimTime::from_nanos(v.round() as u64))),
        "slots" | "slot" => Ok(Horizon::Slots(v.round() as u64)),
        _ => Err(bad()),
    }
}

/// Parses flat `key = value` text. Blank lines and `#` comments are skipped;
/// keys are normalized to lowercase with `-` separators.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) =
            line.split_once('=').ok_or_else(|| invalid_config(format!("line {}: expected key = value", lineno + 1)))?;
        let key = k.trim().to_ascii_lowercase().replace('_', "-");
        if key.is_empty() {
            return Err(invalid_config(format!("line {}: empty key", lineno + 1)));
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

/// Key-value echo of an experiment, readable back by [`parse_kv`].
pub fn echo(exp: &Experiment) -> String {
    let c = &exp.base;
    let horizon = match c.horizon {
        Horizon::Time(t) => format!("{}us", t.as_micros_f64()),
        Horizon::Slots(n) => format!("{n}slots"),
    };
    let mut lines = vec![
        format!("schema-version = {SCHEMA_VERSION}"),
        format!("scheme = {}", c.scheme),
        format!("scenario = {}", exp.scenario),
        format!("m = {}", c.m_stas),
        format!("n = {}", c.n_antennas),
        format!("cw = {}", c.cw),
        if exp.cw_2nd_follows_m { "cw2nd = m".to_string() } else { format!("cw2nd = {}", c.cw_2nd) },
        format!("max-stage = {}", c.max_backoff_stage),
        format!("q-sta = {}", c.q_sta),
        format!("q-ap = {}", c.q_ap()),
        format!("nf-ap = {}", c.nf_ap_cap()),
        format!("nf-sta = {}", c.nf_sta),
        format!("sta-load = {}", exp.sta_load),
        format!("horizon = {horizon}"),
        format!("warmup = {}", c.warmup_fraction),
        format!("seed = {}", c.seed),
        format!("replications = {}", exp.replications),
        format!("analytic = {}", exp.analytic),
        format!("iterations = {}", exp.n_iteration),
    ];
    if let Some(a) = exp.ap_load {
        lines.push(format!("ap-load = {a}"));
    }
    if let Some(s) = &exp.sweep {
        let vals: Vec<String> = s.values.iter().map(u64::to_string).collect();
        lines.push(format!("sweep = {}:{}", s.variable.name(), vals.join(",")));
    }
    lines.join("\n") + "\n"
}
