//! Central atoms and dyadic central units: construction and validation.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::function::{norm, SampledFunction};
use crate::herz::{weighted_lq_norm, HerzParams, Region};
use crate::quadrature::{octave_bounds, polar_nodes, Grid, GridSettings, PolarNode, RuleKind};

/// Radial nodes per octave used to build and validate atoms.
pub const ATOM_NODES_PER_OCTAVE: usize = 32;

/// The quadrature grid atoms are built and validated on.
pub fn atom_grid(dim: usize) -> Result<Grid> {
    let settings = GridSettings {
        k_min: -64,
        k_max: 64,
        nodes_per_octave: ATOM_NODES_PER_OCTAVE,
        sphere_res: if dim == 3 { 16 } else { 32 },
        rule: RuleKind::GaussLegendre,
    };
    Grid::new(&settings, dim)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    /// Squared smooth bump tilted by a seeded linear factor.
    #[default]
    RadialBump,
    /// Smooth bump modulated by a seeded cosine in the radius.
    OscillatingRadial,
    /// Squared smooth bump times a seeded quadratic in each coordinate; not radial.
    TensorPolynomial,
    /// Indicator of the support annulus (or ball, for units).
    Constant,
}

impl Shape {
    pub fn is_radial(self) -> bool {
        !matches!(self, Shape::TensorPolynomial)
    }
}

/// `(1 - τ²)^6` with `τ` mapping `[lo, hi]` onto `[-1, 1]`; zero outside.
#[derive(Clone, Copy, Debug)]
struct Bump {
    lo: f64,
    hi: f64,
}

impl Bump {
    #[inline]
    fn tau(&self, r: f64) -> f64 {
        (2.0 * r - self.hi - self.lo) / (self.hi - self.lo)
    }

    #[inline]
    fn eval(&self, r: f64) -> f64 {
        if r <= self.lo || r > self.hi {
            return 0.0;
        }
        let t = self.tau(r);
        (1.0 - t * t).powi(6)
    }
}

/// Seeded base profile before moment projection.
#[derive(Clone, Debug)]
enum Base {
    Bump { tilt: f64 },
    Cosine { freq: f64, phase: f64 },
    Tensor { lin: [f64; 3], quad: [f64; 3] },
    Constant,
}

impl Base {
    fn new(shape: Shape, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match shape {
            Shape::RadialBump => Base::Bump {
                tilt: rng.gen_range(-0.5..0.5),
            },
            Shape::OscillatingRadial => Base::Cosine {
                freq: rng.gen_range(1.0..4.0),
                phase: rng.gen_range(0.0..std::f64::consts::TAU),
            },
            Shape::TensorPolynomial => {
                let mut lin = [0.0; 3];
                let mut quad = [0.0; 3];
                for i in 0..3 {
                    lin[i] = rng.gen_range(-0.5..0.5);
                    quad[i] = rng.gen_range(-0.5..0.5);
                }
                Base::Tensor { lin, quad }
            }
            Shape::Constant => Base::Constant,
        }
    }

    #[inline]
    fn eval(&self, bump: &Bump, x: &[f64], r: f64) -> f64 {
        if r <= bump.lo || r > bump.hi {
            return 0.0;
        }
        let b = bump.eval(r);
        match self {
            Base::Bump { tilt } => b * b * (1.0 + tilt * bump.tau(r)),
            Base::Cosine { freq, phase } => b * (std::f64::consts::PI * freq * bump.tau(r) + phase).cos(),
            Base::Tensor { lin, quad } => {
                let mut v = b * b;
                for (i, xi) in x.iter().enumerate() {
                    let u = xi / bump.hi;
                    v *= 1.0 + lin[i] * u + quad[i] * u * u;
                }
                v
            }
            Base::Constant => 1.0,
        }
    }
}

/// All multi-indices `γ ∈ N^n` with `|γ| <= s`, graded by degree.
pub fn multi_indices(dim: usize, s: usize) -> Vec<[u32; 3]> {
    let mut out = Vec::new();
    for deg in 0..=s as u32 {
        match dim {
            1 => out.push([deg, 0, 0]),
            2 => (0..=deg).rev().for_each(|a| out.push([a, deg - a, 0])),
            _ => {
                for a in (0..=deg).rev() {
                    for b in (0..=deg - a).rev() {
                        out.push([a, b, deg - a - b]);
                    }
                }
            }
        }
    }
    out
}

#[inline]
fn monomial(x: &[f64], g: &[u32; 3]) -> f64 {
    x.iter().zip(g).map(|(xi, &e)| xi.powi(e as i32)).product()
}

/// Projected profile `g - ∑ c_δ bump(|x|) m_δ(x / R)`.
#[derive(Clone, Debug)]
struct Profile {
    base: Base,
    bump: Bump,
    /// Correction monomials: radial powers `(r/R)^{2j}` or `(x/R)^δ`.
    radial_basis: bool,
    indices: Vec<[u32; 3]>,
    coeffs: Vec<f64>,
    scale: f64,
}

impl Profile {
    #[inline]
    fn basis(&self, i: usize, x: &[f64], r: f64) -> f64 {
        let b = self.bump.eval(r);
        if self.radial_basis {
            b * (r / self.bump.hi).powi(self.indices[i][0] as i32)
        } else {
            let mut u = [0.0; 3];
            for (ui, xi) in u.iter_mut().zip(x) {
                *ui = xi / self.bump.hi;
            }
            b * monomial(&u[..x.len()], &self.indices[i])
        }
    }

    #[inline]
    fn eval(&self, x: &[f64]) -> f64 {
        let r = norm(x);
        let mut v = self.base.eval(&self.bump, x, r);
        for (i, c) in self.coeffs.iter().enumerate() {
            v -= c * self.basis(i, x, r);
        }
        self.scale * v
    }
}

/// A central `(α, q, s; ω₁, ω₂)₀`-atom: supported in `B_{j_a}`, vanishing on
/// `B_{r_a}`, with vanishing moments up to order `s` and
/// `‖a‖_{L^q(ω₂)} <= ω₁(B_{j_a})^{-α/n}`.
#[derive(Clone, Debug)]
pub struct Atom {
    pub j_a: i32,
    pub r_a: i32,
    pub s: usize,
    pub shape: Shape,
    pub seed: u64,
    pub profile: SampledFunction,
    pub certified_bound: f64,
}

/// Serializable recipe for [`make_central_atom`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomSpec {
    pub j_a: i32,
    /// Defaults to `j_a - 3`.
    #[serde(default)]
    pub r_a: Option<i32>,
    /// Defaults to `⌊α - n(1 - 1/q)⌋`.
    #[serde(default)]
    pub s: Option<usize>,
    #[serde(default)]
    pub shape: Shape,
    #[serde(default)]
    pub seed: u64,
}

impl AtomSpec {
    pub fn build(&self, hp: &HerzParams) -> Result<Atom> {
        make_central_atom(self.j_a, self.r_a, self.s, hp, self.shape, self.seed)
    }
}

impl Atom {
    pub fn spec(&self) -> AtomSpec {
        AtomSpec {
            j_a: self.j_a,
            r_a: Some(self.r_a),
            s: Some(self.s),
            shape: self.shape,
            seed: self.seed,
        }
    }

    /// Radial profile sampled on `nodes_per_octave + 1` equispaced radii per
    /// octave of the support annulus.
    /// Tabulates a radial atom, then re-projects the piecewise-linear profile
    /// so the table itself has vanishing moments and attains the size bound.
    pub fn to_table(&self, nodes_per_octave: usize, hp: &HerzParams) -> Result<AtomTable> {
        if !self.profile.is_radial() {
            return Err(Error::Unsupported("tables hold radial atoms only".into()));
        }
        let dim = self.profile.dim();
        let mut nodes = vec![octave_bounds(self.r_a).1];
        for k in self.r_a + 1..=self.j_a {
            let (a, b) = octave_bounds(k);
            for i in 1..=nodes_per_octave {
                nodes.push(a + (b - a) * i as f64 / nodes_per_octave as f64);
            }
        }
        let mut x = [0.0; 3];
        let values: Vec<f64> = nodes
            .iter()
            .map(|&r| {
                x[0] = r;
                self.profile.eval(&x[..dim])
            })
            .collect();

        let grid = atom_grid(dim)?;
        let quad = polar_nodes(&grid, self.r_a + 1, self.j_a, &nodes, true);
        let bump = Bump {
            lo: nodes[0],
            hi: *nodes.last().unwrap(),
        };
        let m = self.s / 2 + 1;
        let table = |v: Vec<f64>| SampledFunction::radial_table(dim, nodes.clone(), v);
        let moments = |f: &SampledFunction| -> Vec<f64> {
            (0..m)
                .map(|j| {
                    quad.iter()
                        .map(|p| p.weight * f.eval(&p.x[..dim]) * (p.r / bump.hi).powi(2 * j as i32))
                        .sum()
                })
                .collect()
        };
        let basis: Vec<Vec<f64>> = (0..m)
            .map(|j| {
                nodes
                    .iter()
                    .map(|&r| bump.eval(r) * (r / bump.hi).powi(2 * j as i32))
                    .collect()
            })
            .collect();
        let mut gram = DMatrix::<f64>::zeros(m, m);
        for (j, b) in basis.iter().enumerate() {
            for (i, v) in moments(&table(b.clone())?).into_iter().enumerate() {
                gram[(i, j)] = v;
            }
        }
        let rhs = DVector::from_vec(moments(&table(values.clone())?));
        let coeffs = gram.lu().solve(&rhs).ok_or(Error::DegenerateProjection)?;
        let mut values = values;
        for (c, b) in coeffs.iter().zip(&basis) {
            for (v, bi) in values.iter_mut().zip(b) {
                *v -= c * bi;
            }
        }

        let size = weighted_lq_norm(&table(values.clone())?, hp.q, &hp.w2, Region::Whole, &grid)?.value;
        if !(size > 0.0 && size.is_finite()) {
            return Err(Error::DegenerateProjection);
        }
        let bound = hp.size_bound(self.j_a);
        for v in &mut values {
            *v *= bound / size;
        }
        Ok(AtomTable {
            spec: self.spec(),
            certified_bound: bound,
            nodes,
            values,
        })
    }

    pub fn from_table(table: &AtomTable, dim: usize) -> Result<Self> {
        let spec = &table.spec;
        let profile = SampledFunction::radial_table(dim, table.nodes.clone(), table.values.clone())?;
        Ok(Self {
            j_a: spec.j_a,
            r_a: spec.r_a.unwrap_or(spec.j_a - 3),
            s: spec.s.unwrap_or(0),
            shape: spec.shape,
            seed: spec.seed,
            profile,
            certified_bound: table.certified_bound,
        })
    }
}

/// A radial atom with its profile tabulated (piecewise-linear in `|x|`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomTable {
    #[serde(flatten)]
    pub spec: AtomSpec,
    pub certified_bound: f64,
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
}

/// Builds a central atom: the seeded shape on the annulus
/// `2^{r_a} < |x| <= 2^{j_a}`, corrected by bump-weighted monomials so its
/// Lebesgue moments up to order `s` vanish, then scaled so the size
/// condition holds with equality.
pub fn make_central_atom(
    j_a: i32,
    r_a: Option<i32>,
    s: Option<usize>,
    hp: &HerzParams,
    shape: Shape,
    seed: u64,
) -> Result<Atom> {
    hp.validate()?;
    hp.check_atomic()?;
    let r_a = r_a.unwrap_or(j_a - 3);
    if r_a >= j_a {
        return Err(invalid(format!(
            "inner radius index r_a = {r_a} must be below j_a = {j_a}"
        )));
    }
    let min_s = hp.default_moment_order();
    let s = s.unwrap_or(min_s);
    if s < min_s {
        return Err(invalid(format!("moment order {s} below the required {min_s}")));
    }
    let dim = hp.dim;
    let grid = atom_grid(dim)?;
    let bump = Bump {
        lo: octave_bounds(r_a).1,
        hi: octave_bounds(j_a).1,
    };
    let radial = shape.is_radial();
    let indices: Vec<[u32; 3]> = if radial {
        (0..=s / 2).map(|j| [2 * j as u32, 0, 0]).collect()
    } else {
        multi_indices(dim, s)
    };
    let mut profile = Profile {
        base: Base::new(shape, seed),
        bump,
        radial_basis: radial,
        indices,
        coeffs: Vec::new(),
        scale: 1.0,
    };

    let nodes = polar_nodes(&grid, r_a + 1, j_a, &[], radial);
    let m = profile.indices.len();
    let test = |i: usize, p: &PolarNode| -> f64 {
        let x = &p.x[..dim];
        if radial {
            (p.r / bump.hi).powi(profile.indices[i][0] as i32)
        } else {
            let mut u = [0.0; 3];
            for (ui, xi) in u.iter_mut().zip(x) {
                *ui = xi / bump.hi;
            }
            monomial(&u[..dim], &profile.indices[i])
        }
    };
    let mut gram = DMatrix::<f64>::zeros(m, m);
    let mut rhs = DVector::<f64>::zeros(m);
    let mut base_l1 = 0.0;
    for p in &nodes {
        let x = &p.x[..dim];
        let g = profile.base.eval(&bump, x, p.r);
        base_l1 += p.weight * g.abs();
        let tests: Vec<f64> = (0..m).map(|i| test(i, p)).collect();
        let basis: Vec<f64> = (0..m).map(|j| profile.basis(j, x, p.r)).collect();
        for i in 0..m {
            rhs[i] += p.weight * g * tests[i];
            for j in 0..m {
                gram[(i, j)] += p.weight * tests[i] * basis[j];
            }
        }
    }
    let coeffs = gram.lu().solve(&rhs).ok_or(Error::DegenerateProjection)?;
    profile.coeffs = coeffs.iter().copied().collect();

    let projected_l1: f64 = nodes.iter().map(|p| p.weight * profile.eval(&p.x[..dim]).abs()).sum();
    if !(projected_l1 > 1e-8 * base_l1) {
        return Err(Error::DegenerateProjection);
    }

    let bound = hp.size_bound(j_a);
    let unscaled = wrap(&profile, dim, r_a + 1, j_a, radial)?;
    let size = weighted_lq_norm(&unscaled, hp.q, &hp.w2, Region::Whole, &grid)?.value;
    if !(size > 0.0 && size.is_finite()) {
        return Err(Error::DegenerateProjection);
    }
    profile.scale = bound / size;
    Ok(Atom {
        j_a,
        r_a,
        s,
        shape,
        seed,
        profile: wrap(&profile, dim, r_a + 1, j_a, radial)?,
        certified_bound: bound,
    })
}

fn wrap(profile: &Profile, dim: usize, lo: i32, hi: i32, radial: bool) -> Result<SampledFunction> {
    let p = Arc::new(profile.clone());
    Ok(SampledFunction::new(dim, Some(lo), hi, move |x| p.eval(x))?.assume_radial(radial))
}

/// A dyadic central `(α, q; ω₁, ω₂)`-unit: supported in `B_k` with
/// `‖u‖_{L^q(ω₂)} <= ω₁(B_k)^{-α/n}`.
#[derive(Clone, Debug)]
pub struct DyadicUnit {
    pub k: i32,
    pub profile: SampledFunction,
    pub certified_bound: f64,
}

impl From<&Atom> for DyadicUnit {
    fn from(a: &Atom) -> Self {
        Self {
            k: a.j_a,
            profile: a.profile.clone(),
            certified_bound: a.certified_bound,
        }
    }
}

/// Builds a unit on `B_k` from a shape, without moment correction, scaled to
/// attain the size bound. `Constant` gives a multiple of `χ_{B_k}`; the other
/// shapes live on `2^{k-3} < |x| <= 2^k`.
pub fn make_dyadic_unit(k: i32, hp: &HerzParams, shape: Shape, seed: u64) -> Result<DyadicUnit> {
    hp.validate()?;
    let dim = hp.dim;
    let grid = atom_grid(dim)?;
    let bound = hp.size_bound(k);
    let unscaled = match shape {
        Shape::Constant => SampledFunction::indicator_ball(dim, k, 1.0)?,
        _ => {
            let profile = Profile {
                base: Base::new(shape, seed),
                bump: Bump {
                    lo: octave_bounds(k - 3).1,
                    hi: octave_bounds(k).1,
                },
                radial_basis: true,
                indices: Vec::new(),
                coeffs: Vec::new(),
                scale: 1.0,
            };
            wrap(&profile, dim, k - 2, k, shape.is_radial())?
        }
    };
    let size = weighted_lq_norm(&unscaled, hp.q, &hp.w2, Region::Whole, &grid)?.value;
    if !(size > 0.0 && size.is_finite()) {
        return Err(Error::DegenerateProjection);
    }
    Ok(DyadicUnit {
        k,
        profile: unscaled.scaled(bound / size),
        certified_bound: bound,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Exterior `L¹` mass relative to the total.
    pub support: f64,
    /// `‖a‖ / bound - 1`.
    pub size: f64,
    /// `|∫ a x^γ| / ∫ |a| |x|^{|γ|}`.
    pub moment: f64,
    /// Inner `L¹` mass relative to the total.
    pub vanishing: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            support: 1e-12,
            size: 1e-8,
            moment: 1e-8,
            vanishing: 1e-12,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Support,
    Size,
    Moments,
    Vanishing,
}

impl std::fmt::Display for Condition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Condition::Support => "(i) support",
            Condition::Size => "(ii) size",
            Condition::Moments => "(iii) moments",
            Condition::Vanishing => "(iv) vanishing near the origin",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionResult {
    pub condition: Condition,
    pub passed: bool,
    pub residual: f64,
    pub tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub conditions: Vec<ConditionResult>,
}

impl ValidationReport {
    fn from_conditions(conditions: Vec<ConditionResult>) -> Self {
        Self {
            passed: conditions.iter().all(|c| c.passed),
            conditions,
        }
    }

    pub fn get(&self, c: Condition) -> Option<&ConditionResult> {
        self.conditions.iter().find(|r| r.condition == c)
    }

    /// First failing condition as an error.
    pub fn into_result(self) -> Result<()> {
        match self.conditions.iter().find(|c| !c.passed) {
            None => Ok(()),
            Some(c) => Err(Error::AtomRejected {
                condition: c.condition.to_string(),
                residual: c.residual,
            }),
        }
    }
}

/// What a candidate function must satisfy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CentralRequirements {
    /// Support in `B_k`.
    pub support_k: i32,
    pub bound: f64,
    /// Moment order; `None` skips (iii).
    pub moments: Option<usize>,
    /// Radius of the ball the function must vanish on; `None` skips (iv).
    pub inner_radius: Option<f64>,
}

pub fn validate_atom(a: &Atom, hp: &HerzParams, tols: &Tolerances) -> Result<ValidationReport> {
    let req = CentralRequirements {
        support_k: a.j_a,
        bound: hp.size_bound(a.j_a),
        moments: Some(a.s),
        inner_radius: Some(octave_bounds(a.r_a).1),
    };
    validate_function(&a.profile, &req, hp, tols, &atom_grid(hp.dim)?)
}

pub fn validate_dyadic_unit(u: &DyadicUnit, hp: &HerzParams, tols: &Tolerances) -> Result<ValidationReport> {
    let req = CentralRequirements {
        support_k: u.k,
        bound: hp.size_bound(u.k),
        moments: None,
        inner_radius: None,
    };
    validate_function(&u.profile, &req, hp, tols, &atom_grid(hp.dim)?)
}

/// Checks the atom conditions on an arbitrary function by quadrature over its
/// declared support.
pub fn validate_function(
    f: &SampledFunction,
    req: &CentralRequirements,
    hp: &HerzParams,
    tols: &Tolerances,
    grid: &Grid,
) -> Result<ValidationReport> {
    hp.validate()?;
    if f.dim() != hp.dim {
        return Err(invalid("function and parameter dimensions differ"));
    }
    let mut conditions = Vec::new();
    let pass = |condition, residual: f64, tolerance: f64| ConditionResult {
        condition,
        passed: residual <= tolerance,
        residual,
        tolerance,
    };
    let Some((lo, hi)) = f.octaves() else {
        conditions.push(pass(Condition::Support, 0.0, tols.support));
        conditions.push(pass(Condition::Size, 0.0, 1.0 + tols.size));
        if req.moments.is_some() {
            conditions.push(pass(Condition::Moments, 0.0, tols.moment));
        }
        if req.inner_radius.is_some() {
            conditions.push(pass(Condition::Vanishing, 0.0, tols.vanishing));
        }
        return Ok(ValidationReport::from_conditions(conditions));
    };
    let dim = hp.dim;
    let outer = octave_bounds(req.support_k).1;
    let mut breaks = f.breakpoints().to_vec();
    breaks.push(outer);
    breaks.extend(req.inner_radius);
    let lo = lo.unwrap_or(grid.radial.k_min).max(grid.radial.k_min);
    let nodes = polar_nodes(grid, lo, hi.min(grid.radial.k_max), &breaks, f.is_radial());
    let values: Vec<f64> = nodes.par_iter().map(|p| f.eval(&p.x[..dim])).collect();
    if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite {
            location: format!("x = {:?}", &nodes[i].x[..dim]),
            value: *v,
        });
    }
    let l1: f64 = nodes.iter().zip(&values).map(|(p, v)| p.weight * v.abs()).sum();
    let relative = |mass: f64| if l1 > 0.0 { mass / l1 } else { 0.0 };

    let exterior: f64 = nodes
        .iter()
        .zip(&values)
        .filter(|(p, _)| p.r > outer)
        .map(|(p, v)| p.weight * v.abs())
        .sum();
    conditions.push(pass(Condition::Support, relative(exterior), tols.support));

    let size = weighted_lq_norm(f, hp.q, &hp.w2, Region::Whole, grid)?.value;
    conditions.push(pass(Condition::Size, size / req.bound, 1.0 + tols.size));

    if let Some(s) = req.moments {
        let mut worst: f64 = 0.0;
        for g in multi_indices(dim, s) {
            let deg = g.iter().sum::<u32>() as i32;
            let (moment, scale) = if f.is_radial() {
                let sphere: f64 =
                    grid.sphere.nodes().map(|(y, w)| w * monomial(y, &g)).sum::<f64>() / grid.sphere.measure();
                let radial: f64 = nodes
                    .iter()
                    .zip(&values)
                    .map(|(p, v)| p.weight * v * p.r.powi(deg))
                    .sum();
                let scale: f64 = nodes
                    .iter()
                    .zip(&values)
                    .map(|(p, v)| p.weight * v.abs() * p.r.powi(deg))
                    .sum();
                (sphere * radial, scale)
            } else {
                let moment: f64 = nodes
                    .iter()
                    .zip(&values)
                    .map(|(p, v)| p.weight * v * monomial(&p.x[..dim], &g))
                    .sum();
                let scale: f64 = nodes
                    .iter()
                    .zip(&values)
                    .map(|(p, v)| p.weight * v.abs() * p.r.powi(deg))
                    .sum();
                (moment, scale)
            };
            if scale > 0.0 {
                worst = worst.max(moment.abs() / scale);
            }
        }
        conditions.push(pass(Condition::Moments, worst, tols.moment));
    }

    if let Some(rho) = req.inner_radius {
        let inner: f64 = nodes
            .iter()
            .zip(&values)
            .filter(|(p, _)| p.r <= rho)
            .map(|(p, v)| p.weight * v.abs())
            .sum();
        conditions.push(pass(Condition::Vanishing, relative(inner), tols.vanishing));
    }
    Ok(ValidationReport::from_conditions(conditions))
}
