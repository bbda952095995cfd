//! Command-line front end: `validate`, `solve`, `simulate`, `export-lp`.
//!
//! Models are composed from an explicit `--formulation` list of registry
//! entries, each written `name[:variant]`. [`run`] returns the process exit
//! code (see [`exit`]).

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::data::{validate_instance, DataError, Instance};
use crate::epi::{self, EmbeddingOptions, SimOptions, VaccinationPlan};
use crate::equity::{self, ParetoPoint};
use crate::location::{self, Assignment};
use crate::model::{lp, BuildError, BuildResult, Model};
use crate::routing::{self, Subtour};
use crate::scm::{self, AssignmentMode, DemandMode, ScmConfig};
use crate::solve::{self, audit, MilpOptions, Solution, SolveError, Status};
use crate::uncertainty::{self, AmbiguitySet, CcTarget, DroOptions};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    /// Instance violations, data errors, or a failed audit.
    pub const VIOLATIONS: i32 = 1;
    pub const INFEASIBLE: i32 = 2;
    /// Node, pivot or iteration limit, or numerical trouble.
    pub const LIMIT: i32 = 3;
    pub const IO: i32 = 4;
    pub const UNBOUNDED: i32 = 5;
    pub const USAGE: i32 = 64;
}

/// One registry entry.
#[derive(Debug, Clone, Copy)]
pub struct Formulation {
    pub name: &'static str,
    /// Variant syntax shown in help, empty when the entry takes none.
    pub variant: &'static str,
    pub summary: &'static str,
}

const fn f(name: &'static str, variant: &'static str, summary: &'static str) -> Formulation {
    Formulation { name, variant, summary }
}

pub const REGISTRY: &[Formulation] = &[
    f("scm.manufacturer_capacity", "", "production capacity with manufacturer activity binaries"),
    f("scm.order_exclusivity", "", "at most one manufacturer per DC, vaccine and period"),
    f("scm.dc_flow", "", "DC inventory balance with lead time, opening, capacity, safety stock"),
    f("scm.dc_flow_aggregated", "", "cumulative DC balance over the lead time"),
    f("scm.cold_chain", "", "cold, very cold and ultra cold DC storage tiers"),
    f("scm.fleet_capacity", "", "shipments within the fleet capacity"),
    f("scm.vc_flow", "fixed|shortage|capped", "VC inventory balance against demand (default shortage)"),
    f("scm.dc_vc_assignment", "direct|cover|packing", "DC to VC assignment (default direct)"),
    f("scm.workforce", "", "health workers hired per VC and period"),
    f("scm.shelf_life", "", "unopened vial shelf life windows"),
    f("scm.vial_dose_balance", "", "opened vials against administered doses and waste"),
    f("scm.open_vial_window", "", "doses administered while a vial is open"),
    f("scm.priority_sequencing", "", "two-group priority vaccination at VCs"),
    f("location.assignment", "fractional|binary", "bi-objective assignment location (default binary)"),
    f("location.max_coverage", "", "maximal covering of population sites"),
    f("location.stepwise_coverage", "", "coverage decreasing by distance band"),
    f("location.outreach", "", "outreach teams serving remote VCs"),
    f("routing.vrp", "mtz|dfj_lazy", "capacitated vehicle routing (default mtz)"),
    f("routing.selective", "BUDGET", "single-vehicle selective visits (default logistics.time_budget)"),
    f("equity.maximin_satisfaction", "", "maximize the lowest satisfaction ratio"),
    f("equity.min_satisfaction_rate", "RATE|assigned", "satisfaction rate floor (default demand.gamma)"),
    f("equity.regional_allocation", "SUPPLY", "regional allocations under a supply cap"),
    f("equity.deviation", "WEIGHT", "deviation from the fair allocation (default 0.5)"),
    f("equity.rawlsian", "", "maximize the smallest regional allocation"),
    f("equity.social_welfare_ii", "SEGMENTS", "squared unmet allocation, piecewise linear (default 8)"),
    f("equity.proportional_sites", "TOTAL", "sites per region near population share"),
    f("equity.carbon", "", "emission and total shortage objectives"),
    f("uncertainty.chance_constraint", "supply|vehicle", "normal chance constraints at --alpha"),
    f("epi.embedding", "", "vaccination plan with embedded epidemic dynamics"),
];

pub fn registry_help() -> String {
    let width = REGISTRY
        .iter()
        .map(|e| e.name.len() + if e.variant.is_empty() { 0 } else { e.variant.len() + 3 })
        .max()
        .unwrap_or(0);
    let mut s = String::from("Formulations (--formulation name[:variant],...):\n");
    for e in REGISTRY {
        let head = if e.variant.is_empty() {
            e.name.to_string()
        } else {
            format!("{}[:{}]", e.name, e.variant)
        };
        s.push_str(&format!("  {head:<width$}  {}\n", e.summary));
    }
    s
}

/// A parsed `name[:variant]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormulationSpec {
    pub name: String,
    pub variant: Option<String>,
}

impl fmt::Display for FormulationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.variant {
            Some(v) => write!(f, "{}:{v}", self.name),
            None => f.write_str(&self.name),
        }
    }
}

impl FormulationSpec {
    fn number(&self) -> Result<Option<f64>, BuildError> {
        match &self.variant {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| BuildError::Invalid(format!("{}: expected a number, got \"{v}\"", self.name))),
        }
    }

    fn word(&self, default: &str) -> String {
        self.variant.clone().unwrap_or_else(|| default.to_string())
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Data(String),
    Status(Status),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(s) | CliError::Io(s) | CliError::Data(s) => f.write_str(s),
            CliError::Status(s) => write!(f, "solver status {s}"),
        }
    }
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Io(_) => exit::IO,
            CliError::Data(_) => exit::VIOLATIONS,
            CliError::Status(s) => status_code(*s),
        }
    }
}

impl From<BuildError> for CliError {
    fn from(e: BuildError) -> Self {
        match e {
            BuildError::Composition(_) => CliError::Usage(format!("composition error: {e}")),
            _ => CliError::Data(format!("build error: {e}")),
        }
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<epi::EpiError> for CliError {
    fn from(e: epi::EpiError) -> Self {
        match e {
            epi::EpiError::Status(s) => CliError::Status(s),
            epi::EpiError::Step(_) => CliError::Usage(e.to_string()),
            epi::EpiError::Build(b) => b.into(),
            _ => CliError::Data(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

pub fn status_code(s: Status) -> i32 {
    match s {
        Status::Optimal => exit::OK,
        Status::Infeasible => exit::INFEASIBLE,
        Status::Unbounded => exit::UNBOUNDED,
        Status::IterationLimit | Status::Numerical => exit::LIMIT,
    }
}

/// Split a comma-separated formulation list and check every name against
/// the registry.
pub fn parse_formulations(list: &str) -> Result<Vec<FormulationSpec>, CliError> {
    let mut out = vec![];
    for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (name, variant) = match item.split_once(':') {
            Some((n, v)) => (n, Some(v.to_string())),
            None => (item, None),
        };
        if !REGISTRY.iter().any(|e| e.name == name) {
            let names: Vec<&str> = REGISTRY.iter().map(|e| e.name).collect();
            return Err(CliError::Usage(format!(
                "unknown formulation \"{name}\"; valid names: {}",
                names.join(", ")
            )));
        }
        out.push(FormulationSpec {
            name: name.to_string(),
            variant,
        });
    }
    Ok(out)
}

/// Settings shared by every builder in one command.
#[derive(Debug, Clone)]
pub struct BuildContext {
    pub scm: ScmConfig,
    /// Risk level for chance constraints.
    pub alpha: f64,
}

/// Run one registry builder. `epi.embedding` is not a model builder and is
/// rejected here.
pub fn apply(spec: &FormulationSpec, m: &mut Model, inst: &Instance, ctx: &BuildContext) -> BuildResult {
    let cfg = &ctx.scm;
    let bare = || -> Result<(), BuildError> {
        match &spec.variant {
            Some(v) => Err(BuildError::Invalid(format!("{} takes no variant, got \"{v}\"", spec.name))),
            None => Ok(()),
        }
    };
    match spec.name.as_str() {
        "scm.manufacturer_capacity" => bare().and_then(|_| scm::build_manufacturer_capacity(m, inst, cfg)),
        "scm.order_exclusivity" => bare().and_then(|_| scm::build_order_exclusivity(m, inst, cfg)),
        "scm.dc_flow" => bare().and_then(|_| scm::build_dc_flow(m, inst, cfg)),
        "scm.dc_flow_aggregated" => bare().and_then(|_| scm::build_dc_flow_aggregated(m, inst, cfg)),
        "scm.cold_chain" => bare().and_then(|_| scm::build_cold_chain(m, inst, cfg)),
        "scm.fleet_capacity" => bare().and_then(|_| scm::build_fleet_capacity(m, inst, cfg)),
        "scm.vc_flow" => {
            let mode: DemandMode = spec.word("shortage").parse()?;
            scm::build_vc_flow(m, inst, cfg, mode)
        }
        "scm.dc_vc_assignment" => {
            let mode: AssignmentMode = spec.word("direct").parse()?;
            scm::build_dc_vc_assignment(m, inst, cfg, mode)
        }
        "scm.workforce" => bare().and_then(|_| scm::build_workforce(m, inst, cfg)),
        "scm.shelf_life" => bare().and_then(|_| scm::build_shelf_life(m, inst, cfg)),
        "scm.vial_dose_balance" => bare().and_then(|_| scm::build_vial_dose_balance(m, inst, cfg)),
        "scm.open_vial_window" => bare().and_then(|_| scm::build_open_vial_window(m, inst, cfg)),
        "scm.priority_sequencing" => bare().and_then(|_| scm::build_priority_sequencing(m, inst, cfg)),
        "location.assignment" => {
            let mode: Assignment = spec.word("binary").parse()?;
            location::build_assignment_location(m, inst, mode)
        }
        "location.max_coverage" => bare().and_then(|_| location::build_max_coverage(m, inst)),
        "location.stepwise_coverage" => bare().and_then(|_| location::build_stepwise_coverage(m, inst)),
        "location.outreach" => bare().and_then(|_| location::build_outreach(m, inst)),
        "routing.vrp" => {
            let mode: Subtour = spec.word("mtz").parse()?;
            routing::build_vrp(m, inst, mode)
        }
        "routing.selective" => {
            let budget = match spec.number()? {
                Some(b) => b,
                None => inst
                    .scalar("logistics", "time_budget")
                    .ok_or_else(|| BuildError::Missing("logistics.time_budget".into()))?,
            };
            routing::build_selective_routing(m, inst, budget)
        }
        "equity.maximin_satisfaction" => bare().and_then(|_| equity::build_maximin_satisfaction(m, inst)),
        "equity.min_satisfaction_rate" => {
            let gamma_default = || {
                inst.scalar("demand", "gamma")
                    .ok_or_else(|| BuildError::Missing("demand.gamma".into()))
            };
            match spec.variant.as_deref() {
                Some("assigned") => equity::build_min_satisfaction_rate(m, inst, gamma_default()?, true),
                Some(_) => equity::build_min_satisfaction_rate(m, inst, spec.number()?.unwrap_or(0.0), false),
                None => equity::build_min_satisfaction_rate(m, inst, gamma_default()?, false),
            }
        }
        "equity.regional_allocation" => {
            let supply = spec
                .number()?
                .ok_or_else(|| BuildError::Invalid("equity.regional_allocation needs :SUPPLY".into()))?;
            equity::build_regional_allocation(m, inst, supply)
        }
        "equity.deviation" => {
            let varsigma = spec.number()?.unwrap_or(0.5);
            let weight = inst.scalar("logistics", "equity_weight").unwrap_or(1.0);
            equity::build_deviation_equity(m, inst, varsigma, weight)
        }
        "equity.rawlsian" => bare().and_then(|_| equity::build_rawlsian(m, inst)),
        "equity.social_welfare_ii" => {
            let n = spec.number()?.unwrap_or(equity::DEFAULT_SEGMENTS as f64);
            if n < 1.0 || n.fract() != 0.0 {
                return Err(BuildError::Invalid(format!("segment count must be a positive integer, got {n}")));
            }
            equity::build_social_welfare_ii(m, inst, n as usize)
        }
        "equity.proportional_sites" => {
            let total = spec
                .number()?
                .ok_or_else(|| BuildError::Invalid("equity.proportional_sites needs :TOTAL".into()))?;
            equity::build_proportional_sites(m, inst, total)
        }
        "equity.carbon" => bare().and_then(|_| equity::build_carbon_objective(m, inst)),
        "uncertainty.chance_constraint" => {
            let target: CcTarget = spec.word("supply").parse().map_err(|e| BuildError::Invalid(format!("{e}")))?;
            uncertainty::build_cc_constraints(m, inst, cfg, target, ctx.alpha)
        }
        "epi.embedding" => Err(BuildError::Composition(
            "epi.embedding drives its own solve loop and cannot be nested".into(),
        )),
        other => Err(BuildError::Invalid(format!("unregistered formulation {other}"))),
    }
}

#[derive(Parser, Debug)]
#[command(name = "vaxopt", version, about = "Vaccine supply chain optimization", after_help = registry_help())]
pub struct Cli {
    /// Log level: -v info, -vv debug.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check an instance file and list every violation.
    Validate { instance: PathBuf },
    /// Compose formulations, solve, and write reports.
    Solve(SolveArgs),
    /// Simulate the epidemic model under a vaccination plan.
    Simulate(SimulateArgs),
    /// Write the composed model in LP format.
    ExportLp(ExportArgs),
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    pub instance: PathBuf,
    /// Comma-separated registry entries, `name[:variant]`.
    #[arg(short, long)]
    pub formulation: String,
    /// Objective to optimize when the model has several.
    #[arg(long)]
    pub objective: Option<String>,
    /// ε bounds `name=v1[;v2...]` for the other objectives; repeat per objective.
    #[arg(long)]
    pub epsilon: Vec<String>,
    /// tssp, robust[:WEIGHT] or dro.
    #[arg(long)]
    pub uncertainty: Option<String>,
    /// Formulations built once, outside the scenarios (with --uncertainty).
    #[arg(long)]
    pub first_stage: Option<String>,
    /// Integer flows bounded by the instance throughput.
    #[arg(long)]
    pub integer: bool,
    /// Risk level for chance constraints.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
}

#[derive(Args, Debug, Clone)]
pub struct SolveArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Relative optimality gap for branch-and-bound.
    #[arg(long, default_value_t = 1e-6)]
    pub gap: f64,
    #[arg(long, default_value_t = 200_000)]
    pub node_limit: usize,
}

#[derive(Args, Debug, Clone)]
pub struct SimulateArgs {
    pub instance: PathBuf,
    /// Plan CSV (`region,group,period,value`) or `none`.
    #[arg(long, default_value = "none")]
    pub plan: String,
    #[arg(long, default_value_t = 1.0)]
    pub dt: f64,
    /// Keep negative excursions instead of clipping them.
    #[arg(long)]
    pub no_clip: bool,
    /// Trajectory CSV path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct ExportArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// LP path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

struct StderrLogger(log::LevelFilter);

impl log::Log for StderrLogger {
    fn enabled(&self, meta: &log::Metadata) -> bool {
        meta.level() <= self.0
    }
    fn log(&self, rec: &log::Record) {
        if self.enabled(rec.metadata()) {
            eprintln!("[{}] {}", rec.level(), rec.args());
        }
    }
    fn flush(&self) {}
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    static LOGGER: std::sync::OnceLock<StderrLogger> = std::sync::OnceLock::new();
    let logger = LOGGER.get_or_init(|| StderrLogger(level));
    if log::set_logger(logger).is_ok() {
        log::set_max_level(logger.0);
    }
}

/// Parse `args` (program name first) and run the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    exit::OK
                }
                _ => {
                    let _ = write!(err, "{text}");
                    exit::USAGE
                }
            };
        }
    };
    init_logging(cli.verbose);
    let result = match &cli.command {
        Command::Validate { instance } => cmd_validate(instance, out),
        Command::Solve(a) => cmd_solve(a, out),
        Command::Simulate(a) => cmd_simulate(a, out),
        Command::ExportLp(a) => cmd_export_lp(a, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.code()
        }
    }
}

fn load(path: &Path) -> Result<Instance, CliError> {
    Instance::load(path).map_err(|e| match e {
        DataError::Io { .. } => CliError::Io(e.to_string()),
        _ => CliError::Data(e.to_string()),
    })
}

/// Load and refuse instances with violations.
fn load_clean(path: &Path) -> Result<Instance, CliError> {
    let inst = load(path)?;
    let v = validate_instance(&inst);
    if !v.is_empty() {
        let lines: Vec<String> = v.iter().map(|x| format!("  {x}")).collect();
        return Err(CliError::Data(format!("instance has {} violation(s):\n{}", v.len(), lines.join("\n"))));
    }
    Ok(inst)
}

pub fn cmd_validate(path: &Path, out: &mut dyn Write) -> Result<i32, CliError> {
    let inst = load(path)?;
    let v = validate_instance(&inst);
    for x in &v {
        let _ = writeln!(out, "{x}");
    }
    if v.is_empty() {
        let _ = writeln!(out, "{}: ok", path.display());
        Ok(exit::OK)
    } else {
        let _ = writeln!(out, "{} violation(s)", v.len());
        Ok(exit::VIOLATIONS)
    }
}

/// Parse `name=v1;v2` items into a grid over their cartesian product.
pub fn parse_epsilon(items: &[String]) -> Result<Vec<BTreeMap<String, f64>>, CliError> {
    let mut axes: Vec<(String, Vec<f64>)> = vec![];
    for item in items {
        let (name, vals) = item
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--epsilon expects name=value, got \"{item}\"")))?;
        let vals: Vec<f64> = vals
            .split(';')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| CliError::Usage(format!("--epsilon {name}: bad number in \"{vals}\"")))?;
        if axes.iter().any(|(n, _)| n == name) {
            return Err(CliError::Usage(format!("--epsilon {name} given twice")));
        }
        axes.push((name.to_string(), vals));
    }
    let mut grid = vec![BTreeMap::new()];
    for (name, vals) in &axes {
        let mut next = vec![];
        for g in &grid {
            for v in vals {
                let mut g = g.clone();
                g.insert(name.clone(), *v);
                next.push(g);
            }
        }
        grid = next;
    }
    Ok(grid)
}

enum Uncertainty {
    None,
    Tssp,
    Robust(f64),
    Dro,
}

fn parse_uncertainty(s: Option<&str>) -> Result<Uncertainty, CliError> {
    Ok(match s {
        None => Uncertainty::None,
        Some("tssp") => Uncertainty::Tssp,
        Some("dro") => Uncertainty::Dro,
        Some(r) if r == "robust" || r.starts_with("robust:") => {
            let w = match r.strip_prefix("robust:") {
                Some(w) => w.parse().map_err(|_| CliError::Usage(format!("bad robust weight \"{w}\"")))?,
                None => 1.0,
            };
            Uncertainty::Robust(w)
        }
        Some(o) => return Err(CliError::Usage(format!("unknown uncertainty mode \"{o}\" (tssp, robust[:WEIGHT], dro)"))),
    })
}

fn context(inst: &Instance, a: &ModelArgs) -> Result<BuildContext, CliError> {
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        return Err(CliError::Usage(format!("--alpha must lie in (0, 1), got {}", a.alpha)));
    }
    let scm = if a.integer {
        ScmConfig::integer(scm::throughput_bound(inst).ceil())
    } else {
        ScmConfig::default()
    };
    Ok(BuildContext { scm, alpha: a.alpha })
}

/// Build the model the flags describe, before objective selection.
fn compose(inst: &Instance, a: &ModelArgs, specs: &[FormulationSpec]) -> Result<(Model, Uncertainty), CliError> {
    let ctx = context(inst, a)?;
    let mode = parse_uncertainty(a.uncertainty.as_deref())?;
    let first = match &a.first_stage {
        Some(list) => parse_formulations(list)?,
        None => vec![],
    };
    let mut m = Model::new();
    if matches!(mode, Uncertainty::None) {
        if !first.is_empty() {
            return Err(CliError::Usage("--first-stage needs --uncertainty".into()));
        }
        for s in specs {
            apply(s, &mut m, inst, &ctx)?;
        }
        return Ok((m, mode));
    }
    let first_fn = |m: &mut Model, i: &Instance| -> BuildResult {
        let mut tags = vec![];
        for s in &first {
            tags.extend(apply(s, m, i, &ctx)?);
        }
        Ok(tags)
    };
    let second_fn = |m: &mut Model, i: &Instance| -> BuildResult {
        let mut tags = vec![];
        for s in specs {
            tags.extend(apply(s, m, i, &ctx)?);
        }
        Ok(tags)
    };
    uncertainty::build_tssp_extensive(&mut m, inst, &[&first_fn], &[&second_fn])?;
    if let Uncertainty::Robust(w) = mode {
        let obj = single_objective_name(&m, a.objective.as_deref())?;
        uncertainty::build_robust_mean_deviation(&mut m, inst, &obj, w)?;
    }
    Ok((m, mode))
}

fn single_objective_name(m: &Model, wanted: Option<&str>) -> Result<String, CliError> {
    match wanted {
        Some(n) if m.objective(n).is_some() => Ok(n.to_string()),
        Some(n) => Err(CliError::Usage(format!("model has no objective \"{n}\"; it has: {}", objective_list(m)))),
        None if m.objectives().len() == 1 => Ok(m.objectives()[0].name.clone()),
        None => Err(CliError::Usage(format!(
            "model has {} objectives ({}); pick one with --objective",
            m.objectives().len(),
            objective_list(m)
        ))),
    }
}

fn objective_list(m: &Model) -> String {
    m.objectives().iter().map(|o| o.name.as_str()).collect::<Vec<_>>().join(", ")
}

/// Reduce to one objective: with several, `--objective` plus `--epsilon`
/// bounds for all others are required.
fn scalarize(m: Model, a: &ModelArgs) -> Result<(Model, Vec<BTreeMap<String, f64>>), CliError> {
    let grid = parse_epsilon(&a.epsilon)?;
    if m.objectives().len() <= 1 {
        if !a.epsilon.is_empty() {
            return Err(CliError::Usage("--epsilon needs a model with several objectives".into()));
        }
        if let Some(n) = &a.objective {
            single_objective_name(&m, Some(n))?;
        }
        return Ok((m, vec![]));
    }
    let keep = a.objective.as_deref().ok_or_else(|| {
        CliError::Usage(format!(
            "model has {} objectives ({}); choose one with --objective and bound the rest with --epsilon name=value",
            m.objectives().len(),
            objective_list(&m)
        ))
    })?;
    single_objective_name(&m, Some(keep))?;
    let missing: Vec<&str> = m
        .objectives()
        .iter()
        .map(|o| o.name.as_str())
        .filter(|n| *n != keep && grid.first().is_none_or(|g| !g.contains_key(*n)))
        .collect();
    if !missing.is_empty() {
        return Err(CliError::Usage(format!("add --epsilon bounds for: {}", missing.join(", "))));
    }
    let sm = equity::epsilon_constraint_scalarize(&m, keep, &grid[0])?;
    if grid.len() == 1 {
        return Ok((sm, vec![]));
    }
    Ok((m, grid))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn solve_model(m: &mut Model, specs: &[FormulationSpec], opts: &MilpOptions) -> Result<Solution, CliError> {
    let lazy = specs.iter().any(|s| s.name == "routing.vrp" && s.variant.as_deref().is_some_and(|v| v.starts_with("dfj")));
    if lazy {
        let (sol, cuts) = routing::solve_with_subtour_cuts(m, opts)?;
        log::info!("added {cuts} subtour cuts");
        return Ok(sol);
    }
    if solve::is_continuous(m) {
        Ok(solve::solve_lp(m)?)
    } else {
        Ok(solve::solve_milp(m, opts)?)
    }
}

fn print_solution(out: &mut dyn Write, sol: &Solution) {
    let _ = writeln!(out, "status: {}", sol.status);
    if let (Some(name), Some(v)) = (&sol.objective_name, sol.objective) {
        let _ = writeln!(out, "objective {name}: {}", lp::fmt_num(v));
    }
    for (n, v) in &sol.objective_values {
        if Some(n) != sol.objective_name.as_ref() {
            let _ = writeln!(out, "  {n}: {}", lp::fmt_num(*v));
        }
    }
    if sol.gap.is_finite() {
        let _ = writeln!(out, "gap: {}", lp::fmt_num(sol.gap));
    }
}

pub fn cmd_solve(a: &SolveArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let specs = parse_formulations(&a.model.formulation)?;
    if specs.is_empty() {
        return Err(CliError::Usage("--formulation is empty".into()));
    }
    let inst = load_clean(&a.model.instance)?;
    std::fs::create_dir_all(&a.out).map_err(|e| io_err(&a.out, e))?;
    if specs.iter().any(|s| s.name == "epi.embedding") {
        return solve_embedding(&inst, a, &specs, out);
    }
    let (m, mode) = compose(&inst, &a.model, &specs)?;
    let opts = MilpOptions {
        rel_gap: a.gap,
        node_limit: a.node_limit,
        ..MilpOptions::default()
    };
    if let Uncertainty::Dro = mode {
        return solve_dro(&inst, &m, a, opts, out);
    }
    let (mut m, grid) = scalarize(m, &a.model)?;
    if !grid.is_empty() {
        return solve_pareto(&m, a, &grid, out);
    }
    let sol = solve_model(&mut m, &specs, &opts)?;
    print_solution(out, &sol);
    if sol.status != Status::Optimal && sol.objective.is_none() {
        return Ok(status_code(sol.status));
    }
    write_reports(&m, &inst, &sol, &specs, &a.out)?;
    let rep = audit(&m, &sol);
    if sol.status == Status::Optimal && !rep.is_clean() {
        let _ = writeln!(out, "audit: {} violated group(s)", rep.groups.values().filter(|g| g.violated > 0).count());
        return Ok(exit::VIOLATIONS);
    }
    let _ = writeln!(out, "audit: {}", if rep.is_clean() { "clean" } else { "not clean" });
    Ok(status_code(sol.status))
}

fn write_reports(m: &Model, inst: &Instance, sol: &Solution, specs: &[FormulationSpec], dir: &Path) -> Result<(), CliError> {
    write_file(&dir.join("solution.csv"), &solve::solution_csv(m, sol))?;
    write_file(&dir.join("audit.csv"), &audit(m, sol).to_csv())?;
    if specs.iter().any(|s| s.name.starts_with("routing.")) {
        write_file(&dir.join("routes.csv"), &routing::route_csv(&routing::routes(m, inst, sol)))?;
    }
    Ok(())
}

fn solve_pareto(m: &Model, a: &SolveArgs, grid: &[BTreeMap<String, f64>], out: &mut dyn Write) -> Result<i32, CliError> {
    let keep = a.model.objective.as_deref().expect("checked in scalarize");
    let points = equity::pareto_sweep(m, keep, grid).map_err(|e| match e {
        equity::SweepError::Build(b) => CliError::from(b),
        equity::SweepError::Solve(s) => CliError::from(s),
    })?;
    write_file(&a.out.join("pareto.csv"), &equity::pareto_csv(&points))?;
    let senses = equity::senses(m);
    let front = equity::nondominated(&points, &senses, 1e-6);
    let _ = writeln!(out, "pareto points: {} solved, {} nondominated", points.iter().filter(|p| p.status == Status::Optimal).count(), front.len());
    let best = best_point(&points, keep, senses[keep]);
    let Some(best) = best else {
        let _ = writeln!(out, "status: infeasible at every ε");
        return Ok(exit::INFEASIBLE);
    };
    let sm = equity::epsilon_constraint_scalarize(m, keep, &best.epsilon)?;
    let mut sol = solve::solve(&sm)?;
    sol.values = best.values.clone();
    for (k, v) in &best.objectives {
        let _ = writeln!(out, "  {k}: {}", lp::fmt_num(*v));
    }
    write_file(&a.out.join("solution.csv"), &solve::solution_csv(&sm, &sol))?;
    write_file(&a.out.join("audit.csv"), &audit(&sm, &sol).to_csv())?;
    Ok(exit::OK)
}

fn best_point<'a>(points: &'a [ParetoPoint], keep: &str, sense: crate::model::ObjSense) -> Option<&'a ParetoPoint> {
    let better = |a: f64, b: f64| match sense {
        crate::model::ObjSense::Minimize => a < b,
        crate::model::ObjSense::Maximize => a > b,
    };
    let mut best: Option<&ParetoPoint> = None;
    for p in points.iter().filter(|p| p.status == Status::Optimal) {
        if best.is_none_or(|b| better(p.objectives[keep], b.objectives[keep])) {
            best = Some(p);
        }
    }
    best
}

fn solve_dro(inst: &Instance, m: &Model, a: &SolveArgs, milp: MilpOptions, out: &mut dyn Write) -> Result<i32, CliError> {
    let obj = single_objective_name(m, a.model.objective.as_deref())?;
    let set = AmbiguitySet::from_instance(inst).map_err(|e| CliError::Data(e.to_string()))?;
    let opts = DroOptions { milp, ..DroOptions::default() };
    let r = uncertainty::dro_worst_case(m, &obj, &set, &opts).map_err(|e| CliError::Data(e.to_string()))?;
    let _ = writeln!(out, "worst-case {obj}: {}", lp::fmt_num(r.value));
    let _ = writeln!(out, "first-stage cost: {}", lp::fmt_num(r.first_stage_cost));
    let mut s = String::from("kind,name,value\n");
    for (n, v) in &r.first_stage {
        s.push_str(&format!("first_stage,{n},{}\n", lp::fmt_num(*v)));
    }
    for (sc, p) in &r.worst_p {
        s.push_str(&format!("worst_p,{sc},{}\n", lp::fmt_num(*p)));
    }
    write_file(&a.out.join("dro.csv"), &s)?;
    Ok(if r.converged { exit::OK } else { exit::LIMIT })
}

fn solve_embedding(inst: &Instance, a: &SolveArgs, specs: &[FormulationSpec], out: &mut dyn Write) -> Result<i32, CliError> {
    if a.model.uncertainty.is_some() || !a.model.epsilon.is_empty() {
        return Err(CliError::Usage("epi.embedding does not combine with --uncertainty or --epsilon".into()));
    }
    let ctx = context(inst, &a.model)?;
    let others: Vec<FormulationSpec> = specs.iter().filter(|s| s.name != "epi.embedding").cloned().collect();
    let extra = |m: &mut Model, i: &Instance| -> BuildResult {
        let mut tags = vec![];
        for s in &others {
            tags.extend(apply(s, m, i, &ctx)?);
        }
        Ok(tags)
    };
    let builders: Vec<&dyn Fn(&mut Model, &Instance) -> BuildResult> = if others.is_empty() { vec![] } else { vec![&extra] };
    let res = epi::build_epi_embedding(inst, &EmbeddingOptions::default(), &builders)?;
    write_file(&a.out.join("plan.csv"), &res.plan.to_csv())?;
    write_file(&a.out.join("trajectory.csv"), &res.trajectory.to_csv())?;
    let _ = writeln!(out, "iterations: {} ({})", res.iterations, if res.converged { "converged" } else { "not converged" });
    let _ = writeln!(out, "predicted deaths: {}", lp::fmt_num(res.predicted_deaths));
    let _ = writeln!(out, "simulated deaths: {}", lp::fmt_num(res.simulated_deaths));
    let _ = writeln!(out, "objective: {}", lp::fmt_num(res.simulated_objective));
    Ok(if res.converged { exit::OK } else { exit::LIMIT })
}

pub fn cmd_simulate(a: &SimulateArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    if !(a.dt > 0.0) || !a.dt.is_finite() {
        return Err(CliError::Usage(format!("--dt must be positive, got {}", a.dt)));
    }
    let inst = load_clean(&a.instance)?;
    let p = inst.epi.as_ref().ok_or_else(|| CliError::Data("instance has no epi block".into()))?;
    let plan = if a.plan == "none" {
        VaccinationPlan::default()
    } else {
        let path = Path::new(&a.plan);
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        VaccinationPlan::from_csv(&text)?
    };
    let x0 = epi::initial_state(&inst, p)?;
    let traj = epi::simulate_delphi_v(&inst, p, &x0, &plan, &SimOptions { dt: a.dt, clip: !a.no_clip })?;
    match &a.out {
        Some(path) => {
            write_file(path, &traj.to_csv())?;
            let _ = writeln!(out, "deaths: {}", lp::fmt_num(traj.deaths()));
            let _ = writeln!(out, "infection load: {}", lp::fmt_num(traj.infection_load()));
            if traj.clipped > 0.0 {
                let _ = writeln!(out, "clipped mass: {}", lp::fmt_num(traj.clipped));
            }
        }
        None => {
            let _ = write!(out, "{}", traj.to_csv());
        }
    }
    Ok(exit::OK)
}

pub fn cmd_export_lp(a: &ExportArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let specs = parse_formulations(&a.model.formulation)?;
    if specs.iter().any(|s| s.name == "epi.embedding") {
        return Err(CliError::Usage("epi.embedding has no single LP to export".into()));
    }
    if matches!(parse_uncertainty(a.model.uncertainty.as_deref())?, Uncertainty::Dro) {
        return Err(CliError::Usage("dro solves a sequence of models; export the tssp form instead".into()));
    }
    let inst = load_clean(&a.model.instance)?;
    let (m, _) = compose(&inst, &a.model, &specs)?;
    let (m, grid) = scalarize(m, &a.model)?;
    if !grid.is_empty() {
        return Err(CliError::Usage("export needs one ε value per objective".into()));
    }
    let text = lp::to_lp_string(&m).map_err(|e| CliError::Usage(e.to_string()))?;
    match &a.out {
        Some(path) => write_file(path, &text)?,
        None => {
            let _ = write!(out, "{text}");
        }
    }
    Ok(exit::OK)
}
