use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use chorate_core::casestudy::{self, StudyRow};
use chorate_core::choquet::{Criterion, DistortionFunction};
use chorate_core::consistency::{self, check_cc_submodular, check_concave, check_specon, Classification, GridSpec};
use chorate_core::dist::ScenarioLoss;
use chorate_core::pooling::{pe_curves, CurveSpec, PoolMode, PoolModel, SimConfig};
use chorate_core::rating::{builtin_ladder, clo_ladder_for, RatingLadder, BUILTIN_LADDERS};

use crate::config::{load, read_input};
use crate::CliError;

#[derive(Parser, Debug)]
#[command(
    name = "chorate",
    version,
    about = "Scenario-based Choquet risk measures, consistency checks and rating studies",
    after_help = "Set CHORATE_THREADS to cap worker threads (0 = all cores)."
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate a scenario criterion on a scenario loss file.
    #[command(long_about = "Evaluate one of the six scenario criteria (Average EL, Average ES, Average MAXVAR, \
Average VaR, Max VaR, Average PD) exactly on a JSON scenario loss file.")]
    Measure(MeasureArgs),
    /// Map a risk value to a rating label.
    #[command(long_about = "Map a risk value to its category under a rating ladder: the CLO threshold \
tables per criterion or the CAT bond threshold tables.")]
    Rate(RateArgs),
    /// Concavity report for a distortion function h.
    #[command(name = "check-h", long_about = "Midpoint-concavity report for a distortion function h, on \
[0,1] and on [0,1); concavity on [0,1) is what pooling consistency of a law-invariant criterion needs.")]
    CheckH(CheckHArgs),
    /// Shape reports for a scenario distortion function g.
    #[command(name = "check-g", long_about = "Componentwise concavity and submodularity report (with its \
weaker companion inequality) and the pooling necessary-condition report for a scenario distortion g.")]
    CheckG(CheckGArgs),
    /// Pooling curves for a conditionally iid model file.
    #[command(long_about = "Senior-tranche criterion values across pool sizes for a conditionally iid \
pool model given as JSON, in exact or Monte Carlo mode.")]
    Pool(PoolArgs),
    /// CLO senior-tranche study across pool sizes.
    #[command(long_about = "CLO study: two equally weighted scenarios with U^(1/Z) asset losses, \
Z ~ U(0.007, 0.009) and Z ~ U(0.1, 0.15), senior attachment 0.1; all six criteria and their ratings \
for pool sizes 1..ell-max.")]
    Clo(CloArgs),
    /// CAT bond pooling study across states.
    #[command(long_about = "CAT bond study: lognormal fits per state (losses in millions plus 0.01), \
attachment at the 90% quantile, detachment for an expected loss of 0.025; EL, ES(0.9), MAXVAR(0.8) and PD \
with ratings as states are added in order.")]
    Cat(CatArgs),
    /// Reproduce the criterion classification fixtures.
    #[command(long_about = "Run the classification fixtures: the six scenario criteria under the shape \
checks, and the four two-scenario indicator criteria under the shape checks, the pooling probe and the \
quasi-convexity search. Exits 1 if any verdict differs from the expected pattern.")]
    Verify(VerifyArgs),
    /// Print or export the built-in rating ladders.
    Ladder(LadderArgs),
}

#[derive(Args, Debug)]
struct MeasureArgs {
    /// Criterion, e.g. avg_el, avg_es:0.9, avg_maxvar:0.3, avg_var:0.8, max_var:0.8, avg_pd.
    #[arg(long)]
    criterion: String,
    /// Scenario loss JSON: {"weights": [...], "scenarios": [{"atoms": [[v, w], ...]}, ...]}.
    #[arg(long)]
    input: PathBuf,
    /// Also print the label under this built-in ladder.
    #[arg(long)]
    ladder: Option<String>,
}

#[derive(Args, Debug)]
struct RateArgs {
    /// Built-in ladder name.
    #[arg(long, conflicts_with = "ladder_file", required_unless_present = "ladder_file")]
    ladder: Option<String>,
    /// Ladder JSON file: {"name", "labels", "uppers"}.
    #[arg(long)]
    ladder_file: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    value: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Family {
    Identity,
    EsWedge,
    MaxvarPower,
    VarIndicator,
    EssinfIndicator,
    EssupIndicator,
    Tabulated,
}

#[derive(Args, Debug)]
struct GridArgs {
    /// Grid points per axis.
    #[arg(long, default_value_t = 101)]
    grid_n: usize,
    /// Drop the right endpoint 1 on every axis.
    #[arg(long)]
    half_open: bool,
    /// Print the report as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct CheckHArgs {
    #[arg(long, value_enum)]
    family: Family,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Knots for a tabulated h, as x:y pairs separated by commas.
    #[arg(long)]
    knots: Option<String>,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Indicator {
    /// 1{x1 v x2 > 0}
    SupMax,
    /// 1{x1 ^ x2 > 0}
    SupMin,
    /// 1{x1 v x2 = 1}
    InfMax,
    /// 1{x1 ^ x2 = 1}
    InfMin,
}

#[derive(Args, Debug)]
struct CheckGArgs {
    /// Criterion whose scenario distortion to check.
    #[arg(long, conflicts_with = "indicator", required_unless_present = "indicator")]
    criterion: Option<String>,
    /// Scenario weights, comma separated.
    #[arg(long, default_value = "0.5,0.5")]
    weights: String,
    /// One of the two-scenario indicator distortions.
    #[arg(long, value_enum)]
    indicator: Option<Indicator>,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Args, Debug)]
struct PoolArgs {
    /// Pool model JSON.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Criteria, comma separated.
    #[arg(long)]
    criteria: Option<String>,
    #[arg(long)]
    ell_max: Option<usize>,
    /// Tranche attachment.
    #[arg(long)]
    k: Option<f64>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    z_nodes: Option<usize>,
    /// Rate each value under the CLO ladder of its criterion.
    #[arg(long)]
    rate_clo: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON run configuration (schema "pool/1"); flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum ModeArg {
    Exact,
    Mc,
}

#[derive(Args, Debug)]
struct CloArgs {
    #[arg(long)]
    ell_max: Option<usize>,
    /// Monte Carlo paths per scenario.
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON run configuration (schema "clo/1"); flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CatArgs {
    /// Loss CSV with header state,year,loss (dollars).
    #[arg(long, conflicts_with = "builtin_fits")]
    data: Option<PathBuf>,
    /// Use the published per-state lognormal fits instead of data.
    #[arg(long)]
    builtin_fits: bool,
    /// States in pooling order, comma separated.
    #[arg(long)]
    order: Option<String>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON run configuration (schema "cat/1"); flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long, default_value_t = 101)]
    grid_n: usize,
    /// Trials of the quasi-convexity search.
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct LadderArgs {
    /// Print this ladder as JSON.
    #[arg(long, conflicts_with_all = ["write_dir", "list"])]
    name: Option<String>,
    /// Write every built-in ladder to <dir>/<name>.json.
    #[arg(long)]
    write_dir: Option<PathBuf>,
    /// List built-in ladder names.
    #[arg(long)]
    list: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoolConfig {
    model: Option<PoolModel>,
    criteria: Option<Vec<String>>,
    ell_max: Option<usize>,
    k: Option<f64>,
    mode: Option<ModeArg>,
    paths: Option<usize>,
    seed: Option<u64>,
    z_nodes: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CloConfig {
    ell_max: Option<usize>,
    paths: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CatConfig {
    data: Option<PathBuf>,
    order: Option<Vec<String>>,
    paths: Option<usize>,
    seed: Option<u64>,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Measure(a) => measure(a),
        Command::Rate(a) => rate(a),
        Command::CheckH(a) => check_h(a),
        Command::CheckG(a) => check_g(a),
        Command::Pool(a) => pool(a),
        Command::Clo(a) => clo(a),
        Command::Cat(a) => cat(a),
        Command::Verify(a) => verify(a),
        Command::Ladder(a) => ladder(a),
    }
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, bytes)
            .map_err(|e| CliError::Output(format!("cannot write {}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| CliError::Output(format!("stdout: {e}"))),
    }
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = read_input(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn parse_list(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Validation(format!("bad number `{t}`")))
        })
        .collect()
}

fn measure(a: MeasureArgs) -> Result<(), CliError> {
    let c: Criterion = a.criterion.parse()?;
    let sl: ScenarioLoss = parse_json(&a.input)?;
    let v = c.value(&sl)?;
    let line = match a.ladder {
        Some(name) => format!("{v},{}\n", builtin_ladder(&name)?.rate(v.clamp(0.0, 1.0))?),
        None => format!("{v}\n"),
    };
    emit(None, line.as_bytes())
}

fn rate(a: RateArgs) -> Result<(), CliError> {
    let ladder = match (a.ladder, a.ladder_file) {
        (Some(name), _) => builtin_ladder(&name)?,
        (None, Some(path)) => RatingLadder::from_json(&read_input(&path)?)?,
        (None, None) => return Err(CliError::Validation("need --ladder or --ladder-file".into())),
    };
    emit(None, format!("{}\n", ladder.rate(a.value)?).as_bytes())
}

fn need(v: Option<f64>, name: &str) -> Result<f64, CliError> {
    v.ok_or_else(|| CliError::Validation(format!("this family needs --{name}")))
}

fn grid(g: &GridArgs) -> Result<GridSpec, CliError> {
    Ok(GridSpec::new(g.grid_n, g.half_open)?)
}

fn report_out(reports: &[consistency::CheckReport], json: bool) -> Result<(), CliError> {
    let text = if json {
        serde_json::to_string_pretty(reports).expect("report serializes") + "\n"
    } else {
        reports.iter().map(|r| r.to_string()).collect::<String>()
    };
    emit(None, text.as_bytes())
}

fn check_h(a: CheckHArgs) -> Result<(), CliError> {
    let h = match a.family {
        Family::Identity => DistortionFunction::identity(),
        Family::EsWedge => DistortionFunction::es_wedge(need(a.p, "p")?)?,
        Family::MaxvarPower => DistortionFunction::maxvar_power(need(a.gamma, "gamma")?)?,
        Family::VarIndicator => DistortionFunction::var_indicator(need(a.p, "p")?)?,
        Family::EssinfIndicator => DistortionFunction::essinf_indicator(),
        Family::EssupIndicator => DistortionFunction::essup_indicator(),
        Family::Tabulated => {
            let knots = a
                .knots
                .ok_or_else(|| CliError::Validation("tabulated needs --knots".into()))?;
            let points = knots
                .split(',')
                .map(|pair| {
                    let (x, y) = pair
                        .split_once(':')
                        .ok_or_else(|| CliError::Validation(format!("bad knot `{pair}`")))?;
                    let num = |t: &str| {
                        t.trim()
                            .parse::<f64>()
                            .map_err(|_| CliError::Validation(format!("bad knot `{pair}`")))
                    };
                    Ok((num(x)?, num(y)?))
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            DistortionFunction::tabulated(points)?
        }
    };
    let g = grid(&a.grid)?;
    let report = check_concave(&h, g);
    report_out(&[report], a.grid.json)
}

fn check_g(a: CheckGArgs) -> Result<(), CliError> {
    let g = match (a.criterion, a.indicator) {
        (Some(c), _) => {
            let c: Criterion = c.parse()?;
            let weights = parse_list(&a.weights)?;
            c.s_distortion(&weights)?.ok_or_else(|| {
                CliError::Validation(format!("{c} is not a Choquet criterion and has no scenario distortion"))
            })?
        }
        (None, Some(ind)) => {
            let table = consistency::indicator_table();
            let idx = match ind {
                Indicator::SupMax => 0,
                Indicator::SupMin => 1,
                Indicator::InfMax => 2,
                Indicator::InfMin => 3,
            };
            table[idx].1.clone()
        }
        (None, None) => return Err(CliError::Validation("need --criterion or --indicator".into())),
    };
    let spec = grid(&a.grid)?;
    let reports = [check_cc_submodular(&g, spec), check_specon(&g, spec)];
    report_out(&reports, a.grid.json)
}

fn rows_csv(rows: &[StudyRow]) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    casestudy::write_rows_csv(rows, &mut buf)?;
    Ok(buf)
}

fn pool(a: PoolArgs) -> Result<(), CliError> {
    let cfg_file: PoolConfig = load(a.config.as_deref(), "pool/1")?;
    let model = match (a.model, cfg_file.model) {
        (Some(path), _) => parse_json::<PoolModel>(&path)?,
        (None, Some(m)) => m,
        (None, None) => return Err(CliError::Validation("need --model or a config with `model`".into())),
    };
    let names: Vec<String> = match (a.criteria, cfg_file.criteria) {
        (Some(s), _) => s.split(',').map(|t| t.trim().to_string()).collect(),
        (None, Some(v)) => v,
        (None, None) => vec!["avg_el".into()],
    };
    let criteria = names
        .iter()
        .map(|n| n.parse::<Criterion>())
        .collect::<Result<Vec<_>, _>>()?;
    let ladders = if a.rate_clo {
        criteria.iter().map(clo_ladder_for).collect::<Result<Vec<_>, _>>()?
    } else {
        Vec::new()
    };
    let specs: Vec<CurveSpec<'_>> = criteria
        .iter()
        .enumerate()
        .map(|(i, c)| CurveSpec {
            measure: c,
            ladder: ladders.get(i),
        })
        .collect();
    let mode = match a.mode.or(cfg_file.mode).unwrap_or(ModeArg::Exact) {
        ModeArg::Exact => PoolMode::Exact,
        ModeArg::Mc => PoolMode::Mc,
    };
    let defaults = SimConfig::default();
    let sim = SimConfig {
        paths: a.paths.or(cfg_file.paths).unwrap_or(defaults.paths),
        seed: a.seed.or(cfg_file.seed).unwrap_or(defaults.seed),
        z_nodes: a.z_nodes.or(cfg_file.z_nodes).unwrap_or(defaults.z_nodes),
        ..defaults
    };
    let ell_max = a.ell_max.or(cfg_file.ell_max).unwrap_or(10);
    let k = a.k.or(cfg_file.k).unwrap_or(0.0);
    let curves = pe_curves(&specs, &model, ell_max, k, &sim, mode)?;
    let mut rows = Vec::new();
    for ell in 0..ell_max {
        for (c, curve) in criteria.iter().zip(&curves) {
            let p = &curve[ell];
            rows.push(StudyRow {
                key: p.ell,
                criterion: c.to_string(),
                value: p.value,
                se: p.se,
                step_se: p.step_se,
                rating: p.label.clone().unwrap_or_default(),
            });
        }
    }
    emit(a.out.as_deref(), &rows_csv(&rows)?)
}

fn clo(a: CloArgs) -> Result<(), CliError> {
    let file: CloConfig = load(a.config.as_deref(), "clo/1")?;
    let defaults = SimConfig::default();
    let sim = SimConfig {
        paths: a.paths.or(file.paths).unwrap_or(defaults.paths),
        seed: a.seed.or(file.seed).unwrap_or(defaults.seed),
        ..defaults
    };
    let ell_max = a.ell_max.or(file.ell_max).unwrap_or(50);
    let rows = casestudy::clo_study(&sim, ell_max)?;
    emit(a.out.as_deref(), &rows_csv(&rows)?)
}

fn cat(a: CatArgs) -> Result<(), CliError> {
    let file: CatConfig = load(a.config.as_deref(), "cat/1")?;
    let defaults = SimConfig::default();
    let sim = SimConfig {
        paths: a.paths.or(file.paths).unwrap_or(1_000_000),
        seed: a.seed.or(file.seed).unwrap_or(defaults.seed),
        ..defaults
    };
    let order: Option<Vec<String>> = a
        .order
        .map(|s| s.split(',').map(|t| t.trim().to_string()).collect())
        .or(file.order);
    let fits = if a.builtin_fits {
        let all = casestudy::reference_fits();
        match order {
            Some(order) => order
                .iter()
                .map(|s| {
                    all.iter()
                        .find(|(n, _)| n == s)
                        .cloned()
                        .ok_or_else(|| CliError::Validation(format!("no built-in fit for `{s}`")))
                })
                .collect::<Result<Vec<_>, _>>()?,
            None => all,
        }
    } else {
        let path = a
            .data
            .or(file.data)
            .ok_or_else(|| CliError::Validation("need --data or --builtin-fits".into()))?;
        let file = std::fs::File::open(&path)
            .map_err(|e| CliError::Unreadable(format!("cannot read {}: {e}", path.display())))?;
        let data = casestudy::read_loss_csv(file)?;
        let order = order.unwrap_or_else(|| data.iter().map(|(s, _)| s.clone()).collect());
        casestudy::fit_states(&data, &order)?
    };
    let rows = casestudy::cat_study(&fits, &sim)?;
    emit(a.out.as_deref(), &rows_csv(&rows)?)
}

type Expected = (Option<bool>, Option<bool>, Option<bool>, Option<bool>);

fn mark(v: Option<bool>) -> &'static str {
    match v {
        Some(true) => "pass",
        Some(false) => "fail",
        None => "-",
    }
}

fn verify(a: VerifyArgs) -> Result<(), CliError> {
    let spec = GridSpec::new(a.grid_n, false)?;
    let criteria = consistency::classify_criteria(spec)?;
    let indicators = consistency::classify_indicators(spec, a.trials, a.seed)?;
    let t = Some(true);
    let f = Some(false);
    // (lattice, necessary condition, pooling probe, QC violation found)
    let expect_criteria: [Expected; 6] = [
        (t, t, None, None),
        (t, t, None, None),
        (t, t, None, None),
        (f, f, None, None),
        (f, f, None, None),
        (None, None, f, None),
    ];
    let expect_indicators: [Expected; 4] = [(t, t, t, f), (f, t, t, t), (f, f, t, t), (f, f, t, t)];

    let mut mismatches = 0;
    let mut text = String::new();
    let mut check = |group: &str, rows: &[Classification], expected: &[Expected]| {
        for (r, e) in rows.iter().zip(expected) {
            let got = (r.cc_submodular, r.specon, r.pooling, r.qc_violation);
            let ok = got == *e;
            if !ok {
                mismatches += 1;
            }
            text.push_str(&format!(
                "{group} {:<18} lattice={:<4} necessary={:<4} pooling={:<4} qc_violation={:<4} {}\n",
                r.name,
                mark(r.cc_submodular),
                mark(r.specon),
                mark(r.pooling),
                match r.qc_violation {
                    Some(true) => "yes",
                    Some(false) => "no",
                    None => "-",
                },
                if ok { "OK" } else { "MISMATCH" }
            ));
        }
    };
    check("criteria", &criteria, &expect_criteria);
    check("indicators", &indicators, &expect_indicators);
    if a.json {
        let all = serde_json::json!({ "criteria": criteria, "indicators": indicators, "mismatches": mismatches });
        emit(None, (serde_json::to_string_pretty(&all).expect("serializes") + "\n").as_bytes())?;
    } else {
        emit(None, text.as_bytes())?;
    }
    if mismatches > 0 {
        return Err(CliError::Mismatch(format!("{mismatches} fixture verdicts differ from the expected pattern")));
    }
    Ok(())
}

fn ladder(a: LadderArgs) -> Result<(), CliError> {
    if a.list {
        return emit(None, (BUILTIN_LADDERS.join("\n") + "\n").as_bytes());
    }
    if let Some(dir) = a.write_dir {
        std::fs::create_dir_all(&dir).map_err(|e| CliError::Output(format!("{}: {e}", dir.display())))?;
        for name in BUILTIN_LADDERS {
            let l = builtin_ladder(name)?;
            emit(Some(&dir.join(format!("{name}.json"))), (l.to_json() + "\n").as_bytes())?;
        }
        return Ok(());
    }
    let name = a
        .name
        .ok_or_else(|| CliError::Validation("need --name, --write-dir or --list".into()))?;
    emit(None, (builtin_ladder(&name)?.to_json() + "\n").as_bytes())
}
