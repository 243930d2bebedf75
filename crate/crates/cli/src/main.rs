use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use herzhaus_core::atoms::{make_central_atom, validate_atom, AtomTable};
use herzhaus_core::bounds::{all_constants, gate_all, GateInputs};
use herzhaus_core::harness::{
    decompose_for, emit_report, run_verification, write_report, ExperimentConfig, FunctionSpec, ReportFormat,
};
use herzhaus_core::herz::herz_norm;
use herzhaus_core::{Atom, AtomSpec, GridSettings, HerzParams, Shape, Tolerances};

#[derive(Parser)]
#[command(
    name = "herzhaus",
    version,
    about = "Hausdorff operators on weighted Herz-type Hardy spaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Overrides for the quadrature grid.
#[derive(Args, Clone, Default)]
struct GridFlags {
    #[arg(long, allow_hyphen_values = true)]
    k_min: Option<i32>,
    #[arg(long, allow_hyphen_values = true)]
    k_max: Option<i32>,
    #[arg(long)]
    nodes_per_octave: Option<usize>,
    #[arg(long)]
    sphere_res: Option<usize>,
}

impl GridFlags {
    fn apply(&self, g: &mut GridSettings) {
        if let Some(v) = self.k_min {
            g.k_min = v;
        }
        if let Some(v) = self.k_max {
            g.k_max = v;
        }
        if let Some(v) = self.nodes_per_octave {
            g.nodes_per_octave = v;
        }
        if let Some(v) = self.sphere_res {
            g.sphere_res = v;
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Gate a theorem, decompose and certify its atoms, and report ratios.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write CSV instead of JSON.
        #[arg(long)]
        csv: bool,
        #[command(flatten)]
        grid: GridFlags,
    },
    /// Per-octave families, the constants C1..C12 and every gate.
    Constants {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        grid: GridFlags,
    },
    /// Herz norm of a described function.
    HerzNorm {
        #[arg(long)]
        function: PathBuf,
        #[arg(long)]
        params: PathBuf,
        #[command(flatten)]
        grid: GridFlags,
    },
    /// Decompose the configured atoms and print the certified pieces.
    Decompose {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        grid: GridFlags,
    },
    /// Build or check central atoms.
    Atom {
        #[command(subcommand)]
        action: AtomAction,
    },
}

#[derive(Subcommand)]
enum AtomAction {
    /// Print a tabulated atom.
    Make {
        #[arg(long)]
        params: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        j_a: i32,
        #[arg(long, allow_hyphen_values = true)]
        r_a: Option<i32>,
        #[arg(long)]
        s: Option<usize>,
        #[arg(long, value_parser = parse_shape, default_value = "radial_bump")]
        shape: Shape,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 64)]
        nodes_per_octave: usize,
    },
    /// Validate an atom given as a recipe or a table.
    Validate {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        atom: PathBuf,
    },
}

fn parse_shape(s: &str) -> std::result::Result<Shape, String> {
    serde_json::from_value(Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_config(path: &Path, grid: &GridFlags) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
    grid.apply(&mut cfg.grid);
    Ok(cfg)
}

fn print(v: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn verify(config: &Path, out: Option<PathBuf>, csv: bool, grid: &GridFlags) -> Result<u8> {
    let cfg = load_config(config, grid)?;
    let report = run_verification(&cfg)?;
    let format = if csv { ReportFormat::Csv } else { ReportFormat::Json };
    match out.or_else(|| cfg.output.clone()) {
        Some(path) => write_report(&report, format, &path).with_context(|| format!("writing {}", path.display()))?,
        None => emit_report(&report, format, std::io::stdout().lock())?,
    }
    if !report.aggregate.gate_passed {
        let gate = &report.provenance.gate;
        eprintln!("gate failed for {}: {}", report.theorem, gate.failures().join(", "));
    }
    Ok(report.exit_code() as u8)
}

fn constants(config: &Path, grid: &GridFlags) -> Result<u8> {
    let cfg = load_config(config, grid)?;
    let r = cfg.resolve()?;
    let report = all_constants(&r.kernel, r.field.as_ref(), &cfg.params, &r.grid);
    let inputs = GateInputs {
        kernel: Some(&r.kernel),
        omega: Some(&r.omega),
        field: r.field.as_ref(),
    };
    let mut gates: Vec<_> = gate_all(&cfg.params, &inputs, &r.grid).into_values().collect();
    gates.sort_by_key(|g| g.theorem.name());
    print(&json!({ "constants": report, "gates": gates }))?;
    Ok(0)
}

fn herz(function: &Path, params: &Path, grid: &GridFlags) -> Result<u8> {
    let spec: FunctionSpec = read_json(function)?;
    let hp: HerzParams = read_json(params)?;
    let mut settings = GridSettings::default();
    grid.apply(&mut settings);
    let f = spec.build(&hp)?;
    let range = match (grid.k_min, grid.k_max) {
        (Some(a), Some(b)) => Some((a, b)),
        _ => None,
    };
    let g = herzhaus_core::Grid::new(&settings, hp.dim)?;
    print(&herz_norm(&f, &hp, range, &g)?)?;
    Ok(0)
}

fn decompose(config: &Path, grid: &GridFlags) -> Result<u8> {
    let cfg = load_config(config, grid)?;
    let r = cfg.resolve()?;
    let mut out = Vec::new();
    let mut all_passed = true;
    for (atom_id, j_a, r_a, s, shape, seed) in cfg.atom_plan() {
        let atom = make_central_atom(j_a, Some(r_a), s, &cfg.params.hp, shape, seed)?;
        let d = decompose_for(&cfg, &r, &atom)?;
        let reports = d.certify(&cfg.tolerances)?;
        all_passed &= reports.iter().all(|rep| rep.passed);
        let mut residuals = Vec::new();
        let dim = cfg.params.hp.dim;
        for p in &d.pieces {
            let mut x = vec![0.0; dim];
            x[0] = 0.75 * 2f64.powi(j_a + p.k);
            residuals.push(json!({ "x": x, "residual": d.reconstruction_residual(&x)? }));
        }
        let pieces: Vec<Value> = d
            .summary()
            .into_iter()
            .zip(&reports)
            .map(|(s, rep)| {
                let mut v = serde_json::to_value(s).expect("summary serializes");
                v["certification"] = serde_json::to_value(rep).expect("report serializes");
                v
            })
            .collect();
        out.push(json!({
            "atom_id": atom_id,
            "j_a": j_a,
            "shape": shape,
            "seed": seed,
            "mode": d.mode,
            "pieces": pieces,
            "dropped": d.dropped,
            "truncated": d.truncated,
            "reconstruction": residuals,
        }));
    }
    print(&out)?;
    Ok(if all_passed { 0 } else { 3 })
}

fn atom(action: AtomAction) -> Result<u8> {
    match action {
        AtomAction::Make {
            params,
            j_a,
            r_a,
            s,
            shape,
            seed,
            nodes_per_octave,
        } => {
            let hp: HerzParams = read_json(&params)?;
            let spec = AtomSpec {
                j_a,
                r_a,
                s,
                shape,
                seed,
            };
            let atom = spec.build(&hp)?;
            if shape.is_radial() {
                print(&atom.to_table(nodes_per_octave, &hp)?)?;
            } else {
                print(&spec)?;
            }
            Ok(0)
        }
        AtomAction::Validate { params, atom } => {
            let hp: HerzParams = read_json(&params)?;
            let value: Value = read_json(&atom)?;
            let a = if value.get("nodes").is_some() {
                let table: AtomTable = serde_json::from_value(value)?;
                Atom::from_table(&table, hp.dim)?
            } else {
                let spec: AtomSpec = serde_json::from_value(value)?;
                spec.build(&hp)?
            };
            let report = validate_atom(&a, &hp, &Tolerances::default())?;
            print(&report)?;
            Ok(if report.passed { 0 } else { 3 })
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Verify { config, out, csv, grid } => verify(&config, out, csv, &grid),
        Command::Constants { config, grid } => constants(&config, &grid),
        Command::HerzNorm { function, params, grid } => herz(&function, &params, &grid),
        Command::Decompose { config, grid } => decompose(&config, &grid),
        Command::Atom { action } => atom(action),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
