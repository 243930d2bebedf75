//! Experiment configuration, the verification driver and report output.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atoms::{atom_grid, make_central_atom, AtomSpec, Shape, Tolerances};
use crate::bounds::{gate_thm, theorem_constant, GateInputs, GateReport, Theorem, TheoremParams};
use crate::decompose::{decompose_matrix, decompose_rough, DecomposeOptions, Decomposition, Mode};
use crate::error::{invalid, Result};
use crate::function::SampledFunction;
use crate::hausdorff::{FieldSpec, KernelSpec, MatrixField, RadialKernel, SphereSymbol, SymbolSpec};
use crate::herz::{herz_norm, lp_sum, HerzParams};
use crate::quadrature::{Grid, GridSettings};

/// A run of atoms at several scales.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomFamily {
    pub j_a: Vec<i32>,
    /// `j_a - r_a`; defaults to 3.
    #[serde(default)]
    pub depth: Option<i32>,
    #[serde(default)]
    pub s: Option<usize>,
    #[serde(default = "default_shapes")]
    pub shapes: Vec<Shape>,
    /// Atoms per `(j_a, shape)`, each with its own seed.
    #[serde(default = "one")]
    pub count: usize,
}

fn default_shapes() -> Vec<Shape> {
    vec![Shape::RadialBump]
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub theorem: Theorem,
    pub kernel: KernelSpec,
    /// Sphere symbol of the rough theorems; defaults to the constant 1.
    #[serde(default)]
    pub symbol: Option<SymbolSpec>,
    /// Matrix field of the matrix theorems.
    #[serde(default)]
    pub field: Option<FieldSpec>,
    pub params: TheoremParams,
    pub atoms: Vec<AtomFamily>,
    /// Defaults to signed for Hardy targets and absolute otherwise.
    #[serde(default)]
    pub mode: Option<Mode>,
    #[serde(default)]
    pub grid: GridSettings,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

/// The objects a configuration refers to, built and checked.
pub struct Resolved {
    pub kernel: RadialKernel,
    pub omega: SphereSymbol,
    pub field: Option<MatrixField>,
    pub grid: Grid,
    pub mode: Mode,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn resolve(&self) -> Result<Resolved> {
        let dim = self.params.hp.dim;
        self.params.hp.validate()?;
        let field = match (&self.field, self.theorem.is_matrix()) {
            (Some(spec), _) => Some(MatrixField::from_spec(spec.clone())?),
            (None, true) => return Err(invalid(format!("{} needs a matrix field", self.theorem))),
            (None, false) => None,
        };
        if let Some(f) = &field {
            if f.dim() != dim {
                return Err(invalid("field and parameter dimensions differ"));
            }
        }
        let mode = self.mode.unwrap_or(if self.theorem.is_hardy_target() {
            Mode::Signed
        } else {
            Mode::Absolute
        });
        Ok(Resolved {
            kernel: RadialKernel::from_spec(self.kernel.clone())?,
            omega: self
                .symbol
                .clone()
                .map_or_else(|| SphereSymbol::constant(1.0), SphereSymbol::from_spec),
            field,
            grid: Grid::new(&self.grid, dim)?,
            mode,
        })
    }

    /// `(atom_id, j_a, r_a, s, shape, seed)` in a fixed order.
    pub fn atom_plan(&self) -> Vec<(usize, i32, i32, Option<usize>, Shape, u64)> {
        let mut out = Vec::new();
        for fam in &self.atoms {
            for &j in &fam.j_a {
                for &shape in &fam.shapes {
                    for _ in 0..fam.count {
                        let id = out.len();
                        let seed = self.seed.wrapping_add(id as u64);
                        out.push((id, j, j - fam.depth.unwrap_or(3), fam.s, shape, seed));
                    }
                }
            }
        }
        out
    }
}

/// Serializable test function for norm computations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionSpec {
    IndicatorAnnulus {
        k: i32,
        #[serde(default = "unit")]
        c: f64,
    },
    IndicatorBall {
        k: i32,
        #[serde(default = "unit")]
        c: f64,
    },
    /// `coefficient |x|^exponent` on the octaves `k_lo..=k_hi`.
    RadialPower {
        exponent: f64,
        k_lo: i32,
        k_hi: i32,
        #[serde(default = "unit")]
        coefficient: f64,
    },
    /// Piecewise-linear radial profile.
    Table {
        nodes: Vec<f64>,
        values: Vec<f64>,
    },
    Atom(AtomSpec),
}

fn unit() -> f64 {
    1.0
}

impl FunctionSpec {
    pub fn build(&self, hp: &HerzParams) -> Result<SampledFunction> {
        let dim = hp.dim;
        match self {
            FunctionSpec::IndicatorAnnulus { k, c } => SampledFunction::indicator_annulus(dim, *k, *c),
            FunctionSpec::IndicatorBall { k, c } => SampledFunction::indicator_ball(dim, *k, *c),
            FunctionSpec::RadialPower {
                exponent,
                k_lo,
                k_hi,
                coefficient,
            } => {
                let (e, c) = (*exponent, *coefficient);
                SampledFunction::radial(dim, Some(*k_lo), *k_hi, move |r| c * r.powf(e))
            }
            FunctionSpec::Table { nodes, values } => SampledFunction::radial_table(dim, nodes.clone(), values.clone()),
            FunctionSpec::Atom(spec) => Ok(spec.build(hp)?.profile),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub atom_id: usize,
    pub j_a: i32,
    pub shape: Shape,
    pub seed: u64,
    /// Finite atomic norm (Hardy targets) or Herz norm of the image.
    pub lhs: f64,
    /// `(∑ c_k^p)^{1/p}` over the certified pieces.
    pub block_bound: f64,
    pub constant: f64,
    pub ratio: f64,
    pub pieces: usize,
    pub certified: bool,
    pub failures: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub max_ratio: Option<f64>,
    pub min_ratio: Option<f64>,
    /// Largest over smallest positive ratio across scales.
    pub spread: Option<f64>,
    pub all_certified: bool,
    pub gate_passed: bool,
    pub gate_margins: BTreeMap<String, Option<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub grid: GridSettings,
    pub tolerances: Tolerances,
    pub seed: u64,
    pub mode: Mode,
    pub constant_name: String,
    pub versions: BTreeMap<String, String>,
    pub gate: GateReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub theorem: Theorem,
    pub rows: Vec<ReportRow>,
    pub aggregate: Aggregate,
    pub provenance: Provenance,
}

impl VerificationReport {
    /// 0 when everything passed, 2 on a gate failure, 3 on a certification
    /// failure.
    pub fn exit_code(&self) -> i32 {
        if !self.aggregate.gate_passed {
            2
        } else if !self.aggregate.all_certified {
            3
        } else {
            0
        }
    }
}

fn versions() -> BTreeMap<String, String> {
    BTreeMap::from([
        ("herzhaus-core".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ("report-format".to_string(), "1".to_string()),
    ])
}

/// Decomposes one atom under the configured theorem.
pub fn decompose_for(cfg: &ExperimentConfig, r: &Resolved, atom: &crate::atoms::Atom) -> Result<Decomposition> {
    let opts = DecomposeOptions {
        theorem: cfg.theorem,
        mode: r.mode,
        tp: &cfg.params,
        grid: &r.grid,
        tols: &cfg.tolerances,
    };
    match &r.field {
        Some(field) if cfg.theorem.is_matrix() => decompose_matrix(&r.kernel, field, atom, &opts),
        _ => decompose_rough(&r.kernel, &r.omega, atom, &opts),
    }
}

/// The constant a row's lhs is divided by; rough Herz-target constants carry
/// the `‖Ω‖_{L^{q'}}` factor.
pub fn governing_constant(cfg: &ExperimentConfig, r: &Resolved) -> Result<f64> {
    let c = theorem_constant(cfg.theorem, &r.kernel, r.field.as_ref(), &cfg.params, &r.grid)?;
    if cfg.theorem.is_matrix() || cfg.theorem == Theorem::HardyHardy {
        return Ok(c);
    }
    let q = cfg.params.hp.q;
    Ok(c * r.omega.lr_norm(q / (q - 1.0), &r.grid.sphere))
}

fn run_row(
    cfg: &ExperimentConfig,
    r: &Resolved,
    constant: f64,
    (atom_id, j_a, r_a, s, shape, seed): (usize, i32, i32, Option<usize>, Shape, u64),
) -> ReportRow {
    let mut row = ReportRow {
        atom_id,
        j_a,
        shape,
        seed,
        lhs: 0.0,
        block_bound: 0.0,
        constant,
        ratio: 0.0,
        pieces: 0,
        certified: false,
        failures: Vec::new(),
    };
    let outcome = (|| -> Result<()> {
        let atom = make_central_atom(j_a, Some(r_a), s, &cfg.params.hp, shape, seed)?;
        let d = decompose_for(cfg, r, &atom)?;
        row.pieces = d.pieces.len();
        for (piece, report) in d.pieces.iter().zip(d.certify(&cfg.tolerances)?) {
            for c in report.conditions.iter().filter(|c| !c.passed) {
                row.failures
                    .push(format!("piece {}: {} residual {:e}", piece.k, c.condition, c.residual));
            }
        }
        row.block_bound = lp_sum(d.coefficients(), d.hp.p);
        row.lhs = if cfg.theorem.is_hardy_target() {
            row.block_bound
        } else {
            let image = d.assembled()?;
            herz_norm(&image, &d.hp, None, &atom_grid(d.hp.dim)?)?.value
        };
        Ok(())
    })();
    if let Err(e) = outcome {
        row.failures.push(e.to_string());
    }
    row.ratio = if row.lhs == 0.0 { 0.0 } else { row.lhs / constant };
    if !row.ratio.is_finite() {
        row.failures
            .push(format!("ratio {} / {} is not finite", row.lhs, constant));
        row.ratio = 0.0;
    }
    row.certified = row.failures.is_empty();
    row
}

/// Gates the theorem, then decomposes and certifies every configured atom.
///
/// A failing gate gives a report with no rows.
pub fn run_verification(cfg: &ExperimentConfig) -> Result<VerificationReport> {
    let r = cfg.resolve()?;
    let inputs = GateInputs {
        kernel: Some(&r.kernel),
        omega: Some(&r.omega),
        field: r.field.as_ref(),
    };
    let gate = gate_thm(&cfg.params, cfg.theorem, &inputs, &r.grid);
    let rows: Vec<ReportRow> = if gate.passed {
        let constant = governing_constant(cfg, &r)?;
        cfg.atom_plan()
            .into_par_iter()
            .map(|plan| run_row(cfg, &r, constant, plan))
            .collect()
    } else {
        Vec::new()
    };
    let positive: Vec<f64> = rows.iter().map(|row| row.ratio).filter(|v| *v > 0.0).collect();
    let max_ratio = rows.iter().map(|row| row.ratio).reduce(f64::max);
    let min_positive = positive.iter().copied().reduce(f64::min);
    let aggregate = Aggregate {
        max_ratio,
        min_ratio: rows.iter().map(|row| row.ratio).reduce(f64::min),
        spread: match (positive.iter().copied().reduce(f64::max), min_positive) {
            (Some(hi), Some(lo)) => Some(hi / lo),
            _ if !rows.is_empty() => Some(1.0),
            _ => None,
        },
        all_certified: rows.iter().all(|row| row.certified),
        gate_passed: gate.passed,
        gate_margins: gate.items.iter().map(|i| (i.name.clone(), i.margin)).collect(),
    };
    Ok(VerificationReport {
        theorem: cfg.theorem,
        rows,
        aggregate,
        provenance: Provenance {
            grid: cfg.grid.clone(),
            tolerances: cfg.tolerances.clone(),
            seed: cfg.seed,
            mode: r.mode,
            constant_name: cfg.theorem.constant_name(cfg.params.hp.p).to_string(),
            versions: versions(),
            gate,
        },
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

/// Columns of the CSV report, in order.
pub const CSV_COLUMNS: [&str; 11] = [
    "atom_id",
    "j_a",
    "shape",
    "seed",
    "lhs",
    "block_bound",
    "constant",
    "ratio",
    "pieces",
    "certified",
    "failures",
];

fn shape_name(s: Shape) -> String {
    serde_json::to_value(s)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

/// Writes the report; CSV has one line per row under a fixed header, with
/// failures joined by `;`.
pub fn emit_report(report: &VerificationReport, format: ReportFormat, out: impl Write) -> Result<()> {
    match format {
        ReportFormat::Json => {
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, report)?;
            writeln!(out)?;
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(CSV_COLUMNS)?;
            for row in &report.rows {
                w.write_record([
                    row.atom_id.to_string(),
                    row.j_a.to_string(),
                    shape_name(row.shape),
                    row.seed.to_string(),
                    row.lhs.to_string(),
                    row.block_bound.to_string(),
                    row.constant.to_string(),
                    row.ratio.to_string(),
                    row.pieces.to_string(),
                    row.certified.to_string(),
                    row.failures.join(";"),
                ])?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

pub fn write_report(report: &VerificationReport, format: ReportFormat, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    emit_report(report, format, std::io::BufWriter::new(file))
}
