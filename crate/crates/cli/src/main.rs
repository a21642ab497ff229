//! `lusin`: operator analysis, construction and verification from the shell.
//!
//! Every command writes `report.json` to `--out`; commands that build a
//! function also write `ledger.csv` and a normalized `operator.json`.
//! Exit status is 0 on success, 2 on invalid input and 3 when a check
//! exceeds its tolerance.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use lusin_core::algebra::{
    constant_rank_report, image_cone_distance, lifted_map, ConstantRankReport,
};
use lusin_core::apps::{complete_current, rectifiable_closure, solenoidal_completion, AppSummary};
use lusin_core::construct::{
    realize, Realization, RealizeOptions, TotalVariation, DEFAULT_SLAB_COUNT, MEMBERSHIP_TOL,
};
use lusin_core::exterior::{blade_basis, MultiVector};
use lusin_core::io::{ledger_to_csv, operator_to_json, read_field, read_operator, FieldData};
use lusin_core::verify::{
    cone_consistency_check, distributional_check, make_test_suite, ConeReport, VerificationReport,
    DEFAULT_QUAD_ORDER, PASS_TOL,
};
use lusin_core::{DVector, Grid, OperatorSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const DEFAULT_COUNT: usize = 20;
const CONE_GRID: usize = 4;
const TANGENCY_TOL: f64 = 1e-14;

#[derive(Parser)]
#[command(
    name = "lusin",
    version,
    about = "Lusin-type realization of first-order operators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Essential range, lifted map and constant-rank diagnostics of an operator.
    Analyze(AnalyzeArgs),
    /// Build the sawtooth for a cellwise field and write its jump ledger.
    Construct(ConstructArgs),
    /// Construct, then check the distributional identity against test functions.
    Verify(VerifyArgs),
    /// Complete an m-vector field to an (m+1)-current with that boundary.
    Currents(CurrentsArgs),
    /// Complete a vector field to a divergence-free measure.
    Solenoidal(SolenoidalArgs),
}

#[derive(Args)]
struct Output {
    /// Directory for report files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct Suite {
    #[arg(long, default_value_t = DEFAULT_QUAD_ORDER)]
    quad: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of test functions.
    #[arg(long, default_value_t = DEFAULT_COUNT)]
    count: usize,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    op: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random directions for the rank scan and vectors for the cone scan.
    #[arg(long, default_value_t = DEFAULT_COUNT)]
    count: usize,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct FieldArgs {
    #[arg(long)]
    op: PathBuf,
    #[arg(long)]
    field: PathBuf,
    /// Cells per axis; must agree with the field header when given.
    #[arg(long)]
    r: Option<usize>,
    /// Slabs per cell.
    #[arg(long, default_value_t = DEFAULT_SLAB_COUNT)]
    m: usize,
    /// Relative distance to the essential range tolerated per cell.
    #[arg(long, default_value_t = MEMBERSHIP_TOL)]
    tol: f64,
    /// Project off-range values instead of rejecting them.
    #[arg(long)]
    project: bool,
}

#[derive(Args)]
struct ConstructArgs {
    #[command(flatten)]
    input: FieldArgs,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    input: FieldArgs,
    #[command(flatten)]
    suite: Suite,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct CurrentsArgs {
    #[arg(long = "N")]
    space_dim: usize,
    /// Degree of the prescribed boundary field.
    #[arg(long)]
    m: usize,
    #[arg(long)]
    field: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SLAB_COUNT)]
    slabs: usize,
    #[command(flatten)]
    suite: Suite,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct SolenoidalArgs {
    #[arg(long = "N")]
    space_dim: usize,
    #[arg(long)]
    field: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SLAB_COUNT)]
    slabs: usize,
    #[command(flatten)]
    suite: Suite,
    #[command(flatten)]
    output: Output,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct ConeSample {
    index: usize,
    distance: f64,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct AnalyzeReport {
    command: &'static str,
    #[serde(rename = "N")]
    space_dim: usize,
    #[serde(rename = "dimE")]
    dim_e: usize,
    #[serde(rename = "dimF")]
    dim_f: usize,
    k: usize,
    range_dim: usize,
    sigma_min: f64,
    pinv_norm: f64,
    constant_rank: ConstantRankReport,
    cone_samples: Vec<ConeSample>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct CellRecord {
    origin: Vec<f64>,
    /// Column-major `dimE × N`.
    gradient: Vec<f64>,
    offset: Vec<f64>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct ConstructReport {
    command: &'static str,
    #[serde(rename = "N")]
    space_dim: usize,
    r: usize,
    m: usize,
    delta: f64,
    face_count: usize,
    field_l1: f64,
    sup_bound: f64,
    #[serde(flatten)]
    total_variation: TotalVariation,
    tv_bound: f64,
    cells: Vec<CellRecord>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct VerifyReport {
    #[serde(flatten)]
    construction: ConstructReport,
    pass_tol: f64,
    passed: bool,
    cone: ConeReport,
    verification: VerificationReport,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct CurrentsReport {
    command: &'static str,
    #[serde(rename = "N")]
    space_dim: usize,
    m: usize,
    slabs: usize,
    basis: Vec<Vec<usize>>,
    #[serde(flatten)]
    summary: AppSummary,
    mass: f64,
    mass_constant: f64,
    mass_bound: f64,
    max_ac_error: f64,
    pass_tol: f64,
    passed: bool,
    verification: VerificationReport,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct SolenoidalReport {
    command: &'static str,
    #[serde(rename = "N")]
    space_dim: usize,
    slabs: usize,
    #[serde(flatten)]
    summary: AppSummary,
    tangency_residual: f64,
    jump_density_mass: f64,
    jump_mass_bound: f64,
    pass_tol: f64,
    passed: bool,
    verification: VerificationReport,
}

/// Whether every check of a command held.
struct Outcome {
    passed: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(Outcome { passed: true }) => ExitCode::SUCCESS,
        Ok(Outcome { passed: false }) => {
            eprintln!("lusin: check failed; see report.json");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("lusin: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<Outcome> {
    match command {
        Command::Analyze(args) => analyze(args),
        Command::Construct(args) => {
            let (op, r) = build(&args.input)?;
            let report = construct_report(&r, args.input.m);
            write_outputs(&args.output.out, &report, &op, &r)?;
            Ok(Outcome { passed: true })
        }
        Command::Verify(args) => verify(args),
        Command::Currents(args) => currents(args),
        Command::Solenoidal(args) => solenoidal(args),
    }
}

fn positive(name: &str, value: usize) -> Result<()> {
    if value == 0 {
        bail!("--{name} must be positive");
    }
    Ok(())
}

fn check_suite(suite: &Suite) -> Result<()> {
    positive("quad", suite.quad)?;
    positive("count", suite.count)
}

fn analyze(args: AnalyzeArgs) -> Result<Outcome> {
    let op = read_operator(&args.op)?;
    let lifted = lifted_map(&op)?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let cone_samples = (0..args.count)
        .map(|index| {
            let c = DVector::from_fn(lifted.range_dim(), |_, _| rng.gen_range(-1.0..1.0));
            let w = &lifted.range_basis * c;
            Ok(ConeSample {
                index,
                distance: image_cone_distance(&op, &w, CONE_GRID)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let report = AnalyzeReport {
        command: "analyze",
        space_dim: op.space_dim(),
        dim_e: op.dim_e(),
        dim_f: op.dim_f(),
        k: op.order(),
        range_dim: lifted.range_dim(),
        sigma_min: lifted.sigma_min,
        pinv_norm: lifted.pinv_norm(),
        constant_rank: constant_rank_report(&op, args.count, args.seed),
        cone_samples,
    };
    fs::create_dir_all(&args.output.out)
        .with_context(|| format!("cannot create {}", args.output.out.display()))?;
    write_json(&args.output.out.join("report.json"), &report)?;
    write_text(
        &args.output.out.join("operator.json"),
        &operator_to_json(&op),
    )?;
    Ok(Outcome { passed: true })
}

fn load_field(path: &Path, space_dim: usize, r: Option<usize>) -> Result<(FieldData, Grid)> {
    let field = read_field(path)?;
    if field.space_dim != space_dim {
        bail!(
            "field has N = {}, expected N = {space_dim}",
            field.space_dim
        );
    }
    if let Some(r) = r {
        positive("r", r)?;
        if r != field.r {
            bail!("--r {r} disagrees with the field header r = {}", field.r);
        }
    }
    let grid = Grid::new(space_dim, field.r)?;
    Ok((field, grid))
}

fn build(args: &FieldArgs) -> Result<(OperatorSpec, Realization)> {
    positive("m", args.m)?;
    if !(args.tol.is_finite() && args.tol > 0.0) {
        bail!("--tol must be positive");
    }
    let op = read_operator(&args.op)?;
    let (field, grid) = load_field(&args.field, op.space_dim(), args.r)?;
    let options = RealizeOptions {
        slab_count: args.m,
        tol: args.tol,
        project: args.project,
    };
    let realization = realize(&op, &field.cells, grid, options)?;
    Ok((op, realization))
}

fn construct_report(r: &Realization, m: usize) -> ConstructReport {
    let grid = r.u.grid();
    ConstructReport {
        command: "construct",
        space_dim: grid.space_dim(),
        r: grid.cells_per_axis(),
        m,
        delta: r.u.delta(),
        face_count: r.decomposition.faces.len(),
        field_l1: r.field_l1,
        sup_bound: r.u.sup_bound(),
        total_variation: r.total_variation,
        tv_bound: r.total_variation.bound_constant * r.field_l1,
        cells: r
            .u
            .cells()
            .iter()
            .map(|c| CellRecord {
                origin: c.origin.clone(),
                gradient: c.gradient.as_slice().to_vec(),
                offset: c.offset.as_slice().to_vec(),
            })
            .collect(),
    }
}

fn verify(args: VerifyArgs) -> Result<Outcome> {
    check_suite(&args.suite)?;
    let (op, r) = build(&args.input)?;
    let suite = make_test_suite(
        op.space_dim(),
        args.suite.seed,
        args.suite.count,
        op.dim_f(),
    );
    let verification = distributional_check(&r.u, &op, &r.decomposition, &suite, args.suite.quad)?;
    let cone = cone_consistency_check(&r.decomposition, &op)?;
    let passed = verification.passed() && cone.max_residual <= 1e-10;
    let mut construction = construct_report(&r, args.input.m);
    construction.command = "verify";
    let report = VerifyReport {
        construction,
        pass_tol: PASS_TOL,
        passed,
        cone,
        verification,
    };
    write_outputs(&args.output.out, &report, &op, &r)?;
    Ok(Outcome { passed })
}

fn currents(args: CurrentsArgs) -> Result<Outcome> {
    positive("N", args.space_dim)?;
    positive("slabs", args.slabs)?;
    check_suite(&args.suite)?;
    let n = args.space_dim;
    if args.m >= n {
        bail!(
            "--m must satisfy 0 ≤ m < N, got m = {} with N = {n}",
            args.m
        );
    }
    let (field, grid) = load_field(&args.field, n, None)?;
    let blades = blade_basis(n, args.m);
    if field.dim_f != blades.len() {
        bail!(
            "field has dimF = {}, a degree-{} multivector in N = {n} has {} components",
            field.dim_f,
            args.m,
            blades.len()
        );
    }
    let s = field
        .cells
        .iter()
        .map(|c| MultiVector::new(n, args.m, c.as_slice().to_vec()))
        .collect::<lusin_core::Result<Vec<_>>>()?;
    let cf = complete_current(&s, grid, args.m, args.slabs)?;
    let closure = rectifiable_closure(&cf, args.suite.seed, args.suite.count, args.suite.quad)?;
    let max_ac_error = cf
        .boundary()
        .ac_density
        .iter()
        .zip(&field.cells)
        .map(|(got, want)| (got - want).amax())
        .fold(0.0, f64::max);
    let field_l1 = cf.realization.field_l1;
    let mass_bound = cf.mass_constant * field_l1;
    let passed =
        closure.check.passed() && max_ac_error <= 1e-12 && cf.mass <= mass_bound * (1.0 + 1e-12);
    let report = CurrentsReport {
        command: "currents",
        space_dim: n,
        m: args.m,
        slabs: args.slabs,
        basis: blades
            .iter()
            .map(|&mask| (0..n).filter(|i| mask & (1 << i) != 0).collect())
            .collect(),
        summary: AppSummary::from(&cf.realization),
        mass: cf.mass,
        mass_constant: cf.mass_constant,
        mass_bound,
        max_ac_error,
        pass_tol: PASS_TOL,
        passed,
        verification: closure.check,
    };
    write_outputs(&args.output.out, &report, &cf.operator, &cf.realization)?;
    Ok(Outcome { passed })
}

fn solenoidal(args: SolenoidalArgs) -> Result<Outcome> {
    positive("N", args.space_dim)?;
    positive("slabs", args.slabs)?;
    check_suite(&args.suite)?;
    let n = args.space_dim;
    let (field, grid) = load_field(&args.field, n, None)?;
    if field.dim_f != n {
        bail!("field has dimF = {}, expected N = {n}", field.dim_f);
    }
    let sc = solenoidal_completion(&field.cells, grid, args.slabs)?;
    let verification = sc.divergence_check(args.suite.seed, args.suite.count, args.suite.quad)?;
    let passed = verification.passed()
        && sc.tangency_residual <= TANGENCY_TOL
        && sc.jump_density_mass <= sc.jump_mass_bound * (1.0 + 1e-12);
    let report = SolenoidalReport {
        command: "solenoidal",
        space_dim: n,
        slabs: args.slabs,
        summary: AppSummary::from(&sc.realization),
        tangency_residual: sc.tangency_residual,
        jump_density_mass: sc.jump_density_mass,
        jump_mass_bound: sc.jump_mass_bound,
        pass_tol: PASS_TOL,
        passed,
        verification,
    };
    write_outputs(&args.output.out, &report, &sc.operator, &sc.realization)?;
    Ok(Outcome { passed })
}

fn write_outputs(
    out: &Path,
    report: &impl Serialize,
    op: &OperatorSpec,
    r: &Realization,
) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    write_json(&out.join("report.json"), report)?;
    write_text(
        &out.join("ledger.csv"),
        &ledger_to_csv(&r.decomposition, op.dim_e())?,
    )?;
    write_text(&out.join("operator.json"), &operator_to_json(op))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}
