//! Hausdorff operators: the one-dimensional `H_Φ`, the rough operator
//! `H_{Φ,Ω}` in polar form, and the matrix operator `H_{Φ,A}`.

use std::sync::Arc;

use nalgebra::{DMatrix, Matrix3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::function::{interp_linear, norm, SampledFunction};
use crate::quadrature::{octave_bounds, octave_of, Estimate, Grid, RadialGrid, SphereGrid};

/// Octave sums over unbounded ranges stop once two successive octave
/// contributions fall below this fraction of the running sum.
pub const DROP_THRESHOLD: f64 = 1e-14;

/// Hard cap on the number of octaves an unbounded sum may visit.
pub const MAX_OCTAVES: usize = 400;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerPiece {
    pub octave: i32,
    pub coefficient: f64,
    pub exponent: f64,
}

/// Serializable kernel description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    /// `Φ(t) = c_k t^{e_k}` on octave `k`, zero on unlisted octaves.
    PiecewisePower {
        pieces: Vec<PowerPiece>,
    },
    /// Piecewise-linear through `(nodes, values)`, zero outside.
    Table {
        nodes: Vec<f64>,
        values: Vec<f64>,
    },
    /// `c t^e` on `(lo, hi]`; a missing bound means `0` or `∞`.
    Power {
        coefficient: f64,
        exponent: f64,
        #[serde(default)]
        lo: Option<f64>,
        #[serde(default)]
        hi: Option<f64>,
    },
    Zero,
}

/// The radial kernel `Φ(t)`, `t > 0`, with support `(lo, hi]`.
#[derive(Clone)]
pub struct RadialKernel {
    spec: Option<KernelSpec>,
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    lo: Option<f64>,
    hi: Option<f64>,
    breakpoints: Vec<f64>,
    zero: bool,
}

impl std::fmt::Debug for RadialKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RadialKernel")
            .field("spec", &self.spec)
            .field("lo", &self.lo)
            .field("hi", &self.hi)
            .finish()
    }
}

impl Serialize for RadialKernel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match &self.spec {
            Some(spec) => spec.serialize(s),
            None => Err(serde::ser::Error::custom("kernel built from a closure has no spec")),
        }
    }
}

impl<'de> Deserialize<'de> for RadialKernel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let spec = KernelSpec::deserialize(d)?;
        RadialKernel::from_spec(spec).map_err(serde::de::Error::custom)
    }
}

impl RadialKernel {
    pub fn from_spec(spec: KernelSpec) -> Result<Self> {
        let mut k = match &spec {
            KernelSpec::PiecewisePower { pieces } => {
                if pieces.is_empty() {
                    Self::zero()
                } else {
                    let mut pieces = pieces.clone();
                    pieces.sort_by_key(|p| p.octave);
                    if pieces.windows(2).any(|w| w[0].octave == w[1].octave) {
                        return Err(invalid("piecewise_power lists an octave twice"));
                    }
                    if pieces
                        .iter()
                        .any(|p| !(p.coefficient.is_finite() && p.exponent.is_finite()))
                    {
                        return Err(invalid("piecewise_power coefficients must be finite"));
                    }
                    let lo = octave_bounds(pieces[0].octave).0;
                    let hi = octave_bounds(pieces[pieces.len() - 1].octave).1;
                    let breaks = pieces.iter().map(|p| octave_bounds(p.octave).1).collect();
                    let table = pieces.clone();
                    Self::from_fn(
                        move |t| {
                            let k = octave_of(t);
                            match table.binary_search_by_key(&k, |p| p.octave) {
                                Ok(i) => table[i].coefficient * t.powf(table[i].exponent),
                                Err(_) => 0.0,
                            }
                        },
                        Some(lo),
                        Some(hi),
                        breaks,
                    )?
                }
            }
            KernelSpec::Table { nodes, values } => {
                if nodes.len() < 2 || nodes.len() != values.len() {
                    return Err(invalid("kernel table needs matching nodes and values, at least two"));
                }
                if nodes[0] <= 0.0 || nodes.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(invalid("kernel table nodes must be positive and increasing"));
                }
                let (n, v) = (nodes.clone(), values.clone());
                Self::from_fn(
                    move |t| interp_linear(&n, &v, t).unwrap_or(0.0),
                    Some(nodes[0]),
                    Some(nodes[nodes.len() - 1]),
                    nodes.clone(),
                )?
            }
            KernelSpec::Power {
                coefficient,
                exponent,
                lo,
                hi,
            } => {
                let (c, e) = (*coefficient, *exponent);
                Self::from_fn(move |t| c * t.powf(e), *lo, *hi, Vec::new())?
            }
            KernelSpec::Zero => Self::zero(),
        };
        k.spec = Some(spec);
        Ok(k)
    }

    /// Kernel from a closure on `(lo, hi]`. Checks `∫ |Φ(t)|/t dt < ∞`.
    pub fn from_fn(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        lo: Option<f64>,
        hi: Option<f64>,
        breakpoints: Vec<f64>,
    ) -> Result<Self> {
        let lo = lo.filter(|l| *l > 0.0);
        if let (Some(l), Some(h)) = (lo, hi) {
            if !(l < h) {
                return Err(invalid(format!("kernel support ({l}, {h}] is empty")));
            }
        }
        if hi.is_some_and(|h| !(h > 0.0)) {
            return Err(invalid("kernel support must reach positive radii"));
        }
        let mut breaks = breakpoints;
        breaks.extend(lo);
        breaks.extend(hi);
        breaks.retain(|b| b.is_finite() && *b > 0.0);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let k = Self {
            spec: None,
            eval: Arc::new(f),
            lo,
            hi,
            breakpoints: breaks,
            zero: false,
        };
        let grid = RadialGrid::default();
        k.octave_sum("∫|Φ(t)|/t dt", &grid, |t| k.eval(t).abs() / t)
            .map_err(|e| invalid(format!("kernel is not integrable against dt/t: {e}")))?;
        Ok(k)
    }

    pub fn zero() -> Self {
        Self {
            spec: Some(KernelSpec::Zero),
            eval: Arc::new(|_| 0.0),
            lo: None,
            hi: None,
            breakpoints: Vec::new(),
            zero: true,
        }
    }

    /// `χ_{(2^{k-1}, 2^k]}`.
    pub fn octave_indicator(k: i32) -> Self {
        Self::from_spec(KernelSpec::PiecewisePower {
            pieces: vec![PowerPiece {
                octave: k,
                coefficient: 1.0,
                exponent: 0.0,
            }],
        })
        .expect("single octave kernel is valid")
    }

    pub fn spec(&self) -> Option<&KernelSpec> {
        self.spec.as_ref()
    }

    pub fn is_zero(&self) -> bool {
        self.zero
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        if self.zero || !(t > 0.0) || self.lo.is_some_and(|l| t <= l) || self.hi.is_some_and(|h| t > h) {
            return 0.0;
        }
        (self.eval)(t)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// Support `(lo, hi]`; `None` for `0` or `∞`.
    pub fn support(&self) -> (Option<f64>, Option<f64>) {
        (self.lo, self.hi)
    }

    /// Octaves meeting the support; `None` marks an unbounded side.
    pub fn support_octaves(&self) -> (Option<i32>, Option<i32>) {
        (self.lo.map(|l| octave_of(l * (1.0 + 1e-12))), self.hi.map(octave_of))
    }

    /// `(m, M)` with `supp Φ ⊂ (2^m, 2^M]`, when the support is compact.
    pub fn compact_bounds(&self) -> Option<(i32, i32)> {
        match self.support_octaves() {
            (Some(lo), Some(hi)) => Some((lo - 1, hi)),
            _ => None,
        }
    }

    /// `∫_{(2^{k-1}, 2^k]} g(t) dt` split at the kernel's break points.
    pub fn octave_integral(
        &self,
        k: i32,
        grid: &RadialGrid,
        extra: &[f64],
        g: impl FnMut(f64) -> f64,
    ) -> Result<Estimate> {
        let (a, b) = octave_bounds(k);
        if self.zero || self.lo.is_some_and(|l| b <= l) || self.hi.is_some_and(|h| a >= h) {
            return Ok(Estimate::exact(0.0));
        }
        let mut breaks = self.breakpoints.clone();
        breaks.extend_from_slice(extra);
        grid.integrate(a, b, &breaks, g)
    }

    /// `∑_k ∫_{octave k} g`, over the support octaves; unbounded sides stop by
    /// the drop threshold.
    pub fn octave_sum(&self, what: &str, grid: &RadialGrid, g: impl Fn(f64) -> f64) -> Result<OctaveSum> {
        if self.zero {
            return Ok(OctaveSum::default());
        }
        let (lo, hi) = self.support_octaves();
        sum_octaves(lo, hi, 0, what, |k| self.octave_integral(k, grid, &[], &g))
    }
}

/// Result of an octave-by-octave sum.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OctaveSum {
    pub value: f64,
    pub error: f64,
    /// Per-octave contributions in ascending `k`.
    pub terms: Vec<(i32, f64)>,
    /// Set when an unbounded side was cut by the drop threshold.
    pub truncated: bool,
}

/// Sums `term(k)` over `lo..=hi`. A `None` side is walked outward from the
/// other bound (or from `start`) until two successive contributions fall
/// below [`DROP_THRESHOLD`] of the running sum; exceeding [`MAX_OCTAVES`]
/// is reported as divergence.
pub fn sum_octaves(
    lo: Option<i32>,
    hi: Option<i32>,
    start: i32,
    what: &str,
    mut term: impl FnMut(i32) -> Result<Estimate>,
) -> Result<OctaveSum> {
    let mut out = OctaveSum::default();
    let add = |out: &mut OctaveSum, k: i32, e: Estimate| {
        out.value += e.value;
        out.error += e.error;
        out.terms.push((k, e.value));
    };
    match (lo, hi) {
        (Some(lo), Some(hi)) => {
            for k in lo..=hi {
                let e = term(k)?;
                add(&mut out, k, e);
            }
        }
        _ => {
            let (first, last) = match (lo, hi) {
                (Some(l), None) => (l, l),
                (None, Some(h)) => (h, h),
                _ => (start, start - 1),
            };
            for k in first..=last {
                let e = term(k)?;
                add(&mut out, k, e);
            }
            let mut walk = |out: &mut OctaveSum, from: i32, step: i32| -> Result<()> {
                let mut k = from;
                let mut small = 0;
                let mut visited = 0;
                loop {
                    let e = term(k)?;
                    add(out, k, e);
                    visited += 1;
                    let running = out.value.abs();
                    if running > 0.0 && e.value.abs() <= DROP_THRESHOLD * running {
                        small += 1;
                    } else {
                        small = 0;
                    }
                    if small >= 2 {
                        return Ok(());
                    }
                    if visited >= MAX_OCTAVES {
                        if running == 0.0 {
                            return Ok(());
                        }
                        return Err(Error::Divergent {
                            what: what.to_string(),
                            partial: out.value,
                            octaves: out.terms.len(),
                        });
                    }
                    k += step;
                }
            };
            if lo.is_none() {
                walk(&mut out, first - 1, -1)?;
            }
            if hi.is_none() {
                walk(&mut out, last + 1, 1)?;
            }
            out.truncated = true;
            out.terms.sort_by_key(|(k, _)| *k);
        }
    }
    Ok(out)
}

/// Serializable sphere symbol.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SymbolSpec {
    Constant {
        value: f64,
    },
    /// `Ω(y') = a0 + b · y'`.
    Linear {
        a0: f64,
        b: Vec<f64>,
    },
}

type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type MatrixFn = Arc<dyn Fn(&[f64]) -> SmallMatrix + Send + Sync>;

/// The angular symbol `Ω` on `S^{n-1}`.
#[derive(Clone)]
pub struct SphereSymbol {
    spec: Option<SymbolSpec>,
    eval: ScalarFn,
    constant: Option<f64>,
}

impl std::fmt::Debug for SphereSymbol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SphereSymbol").field("spec", &self.spec).finish()
    }
}

impl Serialize for SphereSymbol {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match &self.spec {
            Some(spec) => spec.serialize(s),
            None => Err(serde::ser::Error::custom("symbol built from a closure has no spec")),
        }
    }
}

impl<'de> Deserialize<'de> for SphereSymbol {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Ok(SphereSymbol::from_spec(SymbolSpec::deserialize(d)?))
    }
}

impl Default for SphereSymbol {
    fn default() -> Self {
        Self::constant(1.0)
    }
}

impl SphereSymbol {
    pub fn constant(value: f64) -> Self {
        Self::from_spec(SymbolSpec::Constant { value })
    }

    pub fn from_spec(spec: SymbolSpec) -> Self {
        let (eval, constant): (ScalarFn, _) = match &spec {
            SymbolSpec::Constant { value } => {
                let v = *value;
                (Arc::new(move |_| v), Some(v))
            }
            SymbolSpec::Linear { a0, b } => {
                let (a0, b) = (*a0, b.clone());
                let constant = b.iter().all(|c| *c == 0.0).then_some(a0);
                (
                    Arc::new(move |y: &[f64]| a0 + y.iter().zip(&b).map(|(y, c)| y * c).sum::<f64>()),
                    constant,
                )
            }
        };
        Self {
            spec: Some(spec),
            eval,
            constant,
        }
    }

    pub fn from_fn(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            spec: None,
            eval: Arc::new(f),
            constant: None,
        }
    }

    #[inline]
    pub fn eval(&self, y: &[f64]) -> f64 {
        (self.eval)(y)
    }

    /// The constant value, when `Ω` is constant.
    pub fn constant_value(&self) -> Option<f64> {
        self.constant
    }

    /// `‖Ω‖_{L^r(S^{n-1})}`; `r = ∞` gives the maximum over the nodes.
    pub fn lr_norm(&self, r: f64, sphere: &SphereGrid) -> f64 {
        if r.is_infinite() {
            return sphere.nodes().map(|(y, _)| self.eval(y).abs()).fold(0.0, f64::max);
        }
        sphere
            .nodes()
            .map(|(y, w)| w * self.eval(y).abs().powf(r))
            .sum::<f64>()
            .powf(1.0 / r)
    }

    /// `∫_{S^{n-1}} Ω`.
    pub fn integral(&self, sphere: &SphereGrid) -> f64 {
        sphere.nodes().map(|(y, w)| w * self.eval(y)).sum()
    }
}

/// An `n × n` matrix (`n <= 3`), stored padded by the identity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmallMatrix {
    m: Matrix3<f64>,
    dim: usize,
}

impl SmallMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if !(1..=3).contains(&dim) || rows.iter().any(|r| r.len() != dim) {
            return Err(invalid("matrix must be square with dimension 1, 2 or 3"));
        }
        let mut m = Matrix3::identity();
        for (i, row) in rows.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        Ok(Self { m, dim })
    }

    pub fn scalar(dim: usize, c: f64) -> Self {
        let mut m = Matrix3::identity();
        for i in 0..dim {
            m[(i, i)] = c;
        }
        Self { m, dim }
    }

    /// `c R(θ)` in two dimensions.
    pub fn rotation(c: f64, theta: f64) -> Self {
        let (s, co) = theta.sin_cos();
        let mut m = Matrix3::identity();
        m[(0, 0)] = c * co;
        m[(0, 1)] = -c * s;
        m[(1, 0)] = c * s;
        m[(1, 1)] = c * co;
        Self { m, dim: 2 }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Frobenius norm of the `n × n` block.
    pub fn norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s += self.m[(i, j)] * self.m[(i, j)];
            }
        }
        s.sqrt()
    }

    pub fn det(&self) -> f64 {
        self.m.determinant()
    }

    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        if !(d.is_finite() && d.abs() > f64::MIN_POSITIVE) {
            return None;
        }
        self.m.try_inverse().map(|m| Self { m, dim: self.dim })
    }

    #[inline]
    pub fn apply(&self, x: &[f64]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (i, o) in out.iter_mut().enumerate().take(self.dim) {
            for (j, xj) in x.iter().enumerate().take(self.dim) {
                *o += self.m[(i, j)] * xj;
            }
        }
        out
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self.m[(i, j)])
    }
}

/// Frobenius norm `(∑ |a_ij|²)^{1/2}`.
pub fn matrix_norm(m: &DMatrix<f64>) -> f64 {
    m.norm()
}

/// Serializable matrix field `y -> A(y)`; all shipped kinds depend on `|y|`
/// only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldKind {
    /// `A(y) = M`.
    Constant { matrix: Vec<Vec<f64>> },
    /// `A(y) = c0 |y|^e I_n`.
    Dilation { dim: usize, c0: f64, exponent: f64 },
    /// `A(y) = c0 |y|^e R(θ0 + ω log2|y|)` in two dimensions.
    RotationDilation {
        c0: f64,
        exponent: f64,
        #[serde(default)]
        angle: f64,
        #[serde(default)]
        angular_rate: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    #[serde(flatten)]
    pub kind: FieldKind,
    /// Declared bound on `‖A⁻¹(y)‖ ‖A(y)‖`.
    #[serde(default)]
    pub rho_a: Option<f64>,
    /// Declared `(m, M)` with `2^m < ‖A⁻¹(y)‖ <= 2^M` on the kernel support.
    #[serde(default)]
    pub octave_bounds: Option<(i32, i32)>,
}

/// The field `y -> A(y)`.
#[derive(Clone)]
pub struct MatrixField {
    spec: Option<FieldSpec>,
    dim: usize,
    eval: MatrixFn,
    /// `A` depends on `|y|` only.
    radial: bool,
    pub rho_a: Option<f64>,
    pub octave_bounds: Option<(i32, i32)>,
}

impl std::fmt::Debug for MatrixField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MatrixField")
            .field("spec", &self.spec)
            .field("dim", &self.dim)
            .field("radial", &self.radial)
            .finish()
    }
}

impl Serialize for MatrixField {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match &self.spec {
            Some(spec) => spec.serialize(s),
            None => Err(serde::ser::Error::custom("field built from a closure has no spec")),
        }
    }
}

impl<'de> Deserialize<'de> for MatrixField {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        MatrixField::from_spec(FieldSpec::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

impl MatrixField {
    pub fn from_spec(spec: FieldSpec) -> Result<Self> {
        let mut field = match &spec.kind {
            FieldKind::Constant { matrix } => {
                let m = SmallMatrix::from_rows(matrix)?;
                if m.inverse().is_none() {
                    return Err(Error::SingularMatrix { y: Vec::new() });
                }
                Self::from_fn_radial(m.dim(), move |_| m)
            }
            FieldKind::Dilation { dim, c0, exponent } => {
                if !(1..=3).contains(dim) {
                    return Err(Error::Unsupported(format!("dimension {dim} (only 1, 2, 3)")));
                }
                if *c0 == 0.0 || !c0.is_finite() || !exponent.is_finite() {
                    return Err(invalid("dilation field needs finite nonzero c0 and exponent"));
                }
                let (n, c0, e) = (*dim, *c0, *exponent);
                Self::from_fn_radial(n, move |t| SmallMatrix::scalar(n, c0 * t.powf(e)))
            }
            FieldKind::RotationDilation {
                c0,
                exponent,
                angle,
                angular_rate,
            } => {
                if *c0 == 0.0 || !c0.is_finite() || !exponent.is_finite() {
                    return Err(invalid("rotation field needs finite nonzero c0 and exponent"));
                }
                let (c0, e, th, w) = (*c0, *exponent, *angle, *angular_rate);
                Self::from_fn_radial(2, move |t| SmallMatrix::rotation(c0 * t.powf(e), th + w * t.log2()))
            }
        };
        field.rho_a = spec.rho_a;
        field.octave_bounds = spec.octave_bounds;
        field.spec = Some(spec);
        Ok(field)
    }

    /// Field depending on `|y|` only, given as `t -> A(t)`.
    pub fn from_fn_radial(dim: usize, f: impl Fn(f64) -> SmallMatrix + Send + Sync + 'static) -> Self {
        Self {
            spec: None,
            dim,
            eval: Arc::new(move |y| f(norm(y))),
            radial: true,
            rho_a: None,
            octave_bounds: None,
        }
    }

    /// General field `y -> A(y)`.
    pub fn from_fn(dim: usize, f: impl Fn(&[f64]) -> SmallMatrix + Send + Sync + 'static) -> Self {
        Self {
            spec: None,
            dim,
            eval: Arc::new(f),
            radial: false,
            rho_a: None,
            octave_bounds: None,
        }
    }

    pub fn constant(m: SmallMatrix) -> Self {
        let rows = (0..m.dim())
            .map(|i| (0..m.dim()).map(|j| m.m[(i, j)]).collect())
            .collect();
        Self::from_spec(FieldSpec {
            kind: FieldKind::Constant { matrix: rows },
            rho_a: None,
            octave_bounds: None,
        })
        .expect("invertible constant field")
    }

    pub fn with_rho(mut self, rho_a: f64) -> Self {
        self.rho_a = Some(rho_a);
        self
    }

    pub fn with_octave_bounds(mut self, m: i32, big_m: i32) -> Self {
        self.octave_bounds = Some((m, big_m));
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_radial(&self) -> bool {
        self.radial
    }

    /// `A(y)` is a multiple of an orthogonal matrix for every `y`, so
    /// `|A(y) x|` depends on `|x|` only. Known for the analytic kinds.
    pub fn is_conformal(&self) -> bool {
        match self.spec.as_ref().map(|s| &s.kind) {
            Some(FieldKind::Dilation { .. } | FieldKind::RotationDilation { .. }) => true,
            Some(FieldKind::Constant { .. }) => {
                let m = (self.eval)(&[1.0, 0.0, 0.0][..self.dim]).to_dmatrix();
                let g = m.transpose() * &m;
                let c = g[(0, 0)];
                let tol = 1e-12 * c.abs().max(1.0);
                (0..self.dim).all(|i| (0..self.dim).all(|j| (g[(i, j)] - if i == j { c } else { 0.0 }).abs() <= tol))
            }
            None => false,
        }
    }

    pub fn spec(&self) -> Option<&FieldSpec> {
        self.spec.as_ref()
    }

    /// `A(y)`; a singular matrix is an error naming `y`.
    pub fn matrix(&self, y: &[f64]) -> Result<SmallMatrix> {
        let m = (self.eval)(y);
        if m.inverse().is_none() {
            return Err(Error::SingularMatrix { y: y.to_vec() });
        }
        Ok(m)
    }

    /// `A` on the ray `t e_1`.
    pub fn matrix_at_radius(&self, t: f64) -> Result<SmallMatrix> {
        let mut y = [0.0; 3];
        y[0] = t;
        self.matrix(&y[..self.dim])
    }

    /// Radii in `(lo, hi)` where `‖A⁻¹(t)‖` crosses a power of two. Closed
    /// form for the analytic dilation kinds, located by bisection for other
    /// radial fields, and empty for non-radial ones.
    pub fn shell_breaks(&self, lo: f64, hi: f64) -> Vec<f64> {
        let Some(spec) = &self.spec else {
            return if self.radial && lo > 0.0 && hi.is_finite() {
                self.bisected_shell_breaks(lo, hi)
            } else {
                Vec::new()
            };
        };
        let (c0, e, n) = match spec.kind {
            FieldKind::Dilation { dim, c0, exponent } => (c0, exponent, dim as f64),
            FieldKind::RotationDilation { c0, exponent, .. } => (c0, exponent, 2.0),
            FieldKind::Constant { .. } => return Vec::new(),
        };
        if e == 0.0 {
            return Vec::new();
        }
        // ‖A⁻¹(t)‖ = √n / (|c0| t^e)
        let s = |t: f64| n.sqrt() / (c0.abs() * t.powf(e));
        let (s1, s2) = (s(lo), s(hi));
        let (smin, smax) = (s1.min(s2), s1.max(s2));
        let mut out = Vec::new();
        for k in octave_of(smin) - 1..=octave_of(smax) + 1 {
            let level = 2f64.powi(k);
            let t = (n.sqrt() / (c0.abs() * level)).powf(1.0 / e);
            if t > lo && t < hi {
                out.push(t);
            }
        }
        out
    }

    fn bisected_shell_breaks(&self, lo: f64, hi: f64) -> Vec<f64> {
        const SAMPLES_PER_OCTAVE: f64 = 256.0;
        let shell = |t: f64| {
            self.matrix_at_radius(t)
                .ok()
                .and_then(|m| m.inverse())
                .map(|inv| octave_of(inv.norm()))
        };
        let steps = ((hi / lo).log2() * SAMPLES_PER_OCTAVE).ceil().max(1.0) as usize;
        let ratio = (hi / lo).powf(1.0 / steps as f64);
        let mut out = Vec::new();
        let mut a = lo;
        let mut sa = shell(a);
        for i in 1..=steps {
            let b = if i == steps { hi } else { lo * ratio.powi(i as i32) };
            let sb = shell(b);
            if sa.is_some() && sb.is_some() && sa != sb {
                let (mut x, mut y) = (a, b);
                for _ in 0..80 {
                    let m = 0.5 * (x + y);
                    if m <= x || m >= y {
                        break;
                    }
                    if shell(m) == sa {
                        x = m;
                    } else {
                        y = m;
                    }
                }
                out.push(y);
            }
            a = b;
            sa = sb;
        }
        out
    }

    /// Radii where `|A(t) x|` equals `target`, for the analytic kinds.
    fn level_radii(&self, x_norm: f64, targets: &[f64]) -> Vec<f64> {
        let Some(spec) = &self.spec else {
            return Vec::new();
        };
        let (c0, e) = match spec.kind {
            FieldKind::Dilation { c0, exponent, .. } => (c0, exponent),
            FieldKind::RotationDilation { c0, exponent, .. } => (c0, exponent),
            FieldKind::Constant { .. } => return Vec::new(),
        };
        if e == 0.0 || x_norm == 0.0 {
            return Vec::new();
        }
        targets
            .iter()
            .map(|b| (b / (c0.abs() * x_norm)).powf(1.0 / e))
            .filter(|t| t.is_finite() && *t > 0.0)
            .collect()
    }

    /// Largest `‖A⁻¹(y)‖ ‖A(y)‖` over the nodes of the kernel support.
    pub fn sampled_rho(&self, kernel: &RadialKernel, grid: &Grid) -> Result<f64> {
        let mut worst: f64 = 0.0;
        self.for_each_support_node(kernel, grid, |_, y, _| {
            let m = self.matrix(y)?;
            let inv = m.inverse().ok_or_else(|| Error::SingularMatrix { y: y.to_vec() })?;
            worst = worst.max(m.norm() * inv.norm());
            Ok(())
        })?;
        Ok(worst)
    }

    /// Extremes of `‖A⁻¹(y)‖` over the nodes of the kernel support.
    pub fn sampled_inverse_norm_range(&self, kernel: &RadialKernel, grid: &Grid) -> Result<(f64, f64)> {
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        self.for_each_support_node(kernel, grid, |_, y, _| {
            let inv = self
                .matrix(y)?
                .inverse()
                .ok_or_else(|| Error::SingularMatrix { y: y.to_vec() })?;
            lo = lo.min(inv.norm());
            hi = hi.max(inv.norm());
            Ok(())
        })?;
        Ok((lo, hi))
    }

    /// Visits `(t, y, weight)` with `weight` the `dy/|y|^n` measure, over the
    /// compact kernel support.
    pub(crate) fn for_each_support_node(
        &self,
        kernel: &RadialKernel,
        grid: &Grid,
        mut visit: impl FnMut(f64, &[f64], f64) -> Result<()>,
    ) -> Result<()> {
        let (Some(lo), Some(hi)) = kernel.support_octaves() else {
            return Err(invalid("matrix field checks need a compactly supported kernel"));
        };
        let (tl, th) = kernel.support();
        let mut breaks = kernel.breakpoints().to_vec();
        breaks.extend(self.shell_breaks(tl.unwrap_or(0.0), th.unwrap_or(f64::INFINITY)));
        let n = self.dim;
        for k in lo..=hi {
            let (a, b) = octave_bounds(k);
            let mut err = None;
            grid.radial.for_each_node(a, b, &breaks, |t, w| {
                if err.is_some() || kernel.eval(t) == 0.0 {
                    return;
                }
                if self.radial {
                    let mut y = [0.0; 3];
                    y[0] = t;
                    if let Err(e) = visit(t, &y[..n], w / t * grid.sphere.measure()) {
                        err = Some(e);
                    }
                } else {
                    for (yp, wy) in grid.sphere.nodes() {
                        let mut y = [0.0; 3];
                        for i in 0..n {
                            y[i] = t * yp[i];
                        }
                        if let Err(e) = visit(t, &y[..n], w * wy / t) {
                            err = Some(e);
                            return;
                        }
                    }
                }
            });
            if let Some(e) = err {
                return Err(e);
            }
        }
        Ok(())
    }
}

/// Break radii of a radial argument: the break points of `f` and the edges of
/// its support octaves.
fn radial_edges(f: &SampledFunction) -> Vec<f64> {
    let mut out = f.breakpoints().to_vec();
    if let Some((lo, hi)) = f.octaves() {
        let lo = lo.unwrap_or(hi - 60);
        for k in lo..=hi {
            out.push(octave_bounds(k).1);
        }
        out.push(octave_bounds(lo).0);
    }
    out
}

/// `t`-range where `|x|/t` meets the support of `f`.
fn dilation_window(f: &SampledFunction, x_norm: f64) -> Option<(Option<i32>, Option<i32>)> {
    let (lo, hi) = f.octaves()?;
    // |x|/t <= 2^hi  <=>  t >= |x| 2^{-hi};  |x|/t > 2^{lo-1}  <=>  t < |x| 2^{1-lo}
    let t_lo = octave_of(x_norm * 2f64.powi(-hi) * (1.0 + 1e-12));
    let t_hi = lo.map(|l| octave_of(x_norm * 2f64.powi(1 - l)));
    Some((Some(t_lo), t_hi))
}

fn intersect(a: (Option<i32>, Option<i32>), b: (Option<i32>, Option<i32>)) -> Option<(Option<i32>, Option<i32>)> {
    let lo = match (a.0, b.0) {
        (Some(x), Some(y)) => Some(x.max(y)),
        (x, None) | (None, x) => x,
    };
    let hi = match (a.1, b.1) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, None) | (None, x) => x,
    };
    if let (Some(l), Some(h)) = (lo, hi) {
        if l > h {
            return None;
        }
    }
    Some((lo, hi))
}

/// `H_Φ f(x) = ∫_0^∞ Φ(y)/y f(x/y) dy`.
pub fn apply_hausdorff_1d(kernel: &RadialKernel, f: &SampledFunction, x: f64, grid: &RadialGrid) -> Result<Estimate> {
    if f.dim() != 1 {
        return Err(invalid("the one-dimensional operator needs a function on R"));
    }
    if x == 0.0 {
        return Err(invalid("Hausdorff operators are evaluated at x != 0 only"));
    }
    if kernel.is_zero() || f.is_zero() {
        return Ok(Estimate::exact(0.0));
    }
    let Some((lo, hi)) = dilation_window(f, x.abs()).and_then(|w| intersect(w, kernel.support_octaves())) else {
        return Ok(Estimate::exact(0.0));
    };
    let breaks: Vec<f64> = radial_edges(f).iter().map(|b| x.abs() / b).collect();
    let s = sum_octaves(lo, hi, octave_of(x.abs()), "H_Φ f(x)", |k| {
        kernel.octave_integral(k, grid, &breaks, |y| kernel.eval(y) / y * f.eval(&[x / y]))
    })?;
    Ok(Estimate {
        value: s.value,
        error: s.error,
    })
}

/// Restriction of an evaluator to one octave of `|y|` (rough) or one shell
/// of `‖A⁻¹(y)‖` (matrix), optionally with absolute values on every factor.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Restriction {
    pub octave: Option<i32>,
    pub absolute: bool,
}

impl Restriction {
    pub fn octave(k: i32) -> Self {
        Self {
            octave: Some(k),
            absolute: false,
        }
    }

    pub fn absolute(self) -> Self {
        Self { absolute: true, ..self }
    }
}

/// `H_{Φ,Ω} f(x) = ∫_0^∞ ∫_{S^{n-1}} Φ(t)/t Ω(y') f(|x| y'/t) dy' dt`.
pub fn apply_rough_hausdorff(
    kernel: &RadialKernel,
    omega: &SphereSymbol,
    f: &SampledFunction,
    x: &[f64],
    grid: &Grid,
) -> Result<Estimate> {
    apply_rough_restricted(kernel, omega, f, x, grid, Restriction::default())
}

/// [`apply_rough_hausdorff`] with `t` restricted to one octave.
pub fn apply_rough_restricted(
    kernel: &RadialKernel,
    omega: &SphereSymbol,
    f: &SampledFunction,
    x: &[f64],
    grid: &Grid,
    restrict: Restriction,
) -> Result<Estimate> {
    let n = grid.dim();
    if f.dim() != n || x.len() != n {
        return Err(invalid("dimension mismatch between function, point and grid"));
    }
    let r = norm(x);
    if r == 0.0 {
        return Err(invalid("Hausdorff operators are evaluated at x != 0 only"));
    }
    if kernel.is_zero() || f.is_zero() || omega.constant_value() == Some(0.0) {
        return Ok(Estimate::exact(0.0));
    }
    let mut window = dilation_window(f, r).and_then(|w| intersect(w, kernel.support_octaves()));
    if let Some(k) = restrict.octave {
        window = window.and_then(|w| intersect(w, (Some(k), Some(k))));
    }
    let Some((lo, hi)) = window else {
        return Ok(Estimate::exact(0.0));
    };
    let abs = restrict.absolute;
    let fv = |p: &[f64]| if abs { f.eval(p).abs() } else { f.eval(p) };
    let om = |y: &[f64]| if abs { omega.eval(y).abs() } else { omega.eval(y) };
    let breaks: Vec<f64> = radial_edges(f).iter().map(|b| r / b).collect();
    let omega_mass = f
        .is_radial()
        .then(|| grid.sphere.nodes().map(|(y, w)| w * om(y)).sum::<f64>());
    let inner = |t: f64| -> f64 {
        let s = r / t;
        if let Some(m) = omega_mass {
            let mut p = [0.0; 3];
            p[0] = s;
            return m * fv(&p[..n]);
        }
        let mut acc = 0.0;
        for (y, w) in grid.sphere.nodes() {
            let mut p = [0.0; 3];
            for i in 0..n {
                p[i] = s * y[i];
            }
            acc += w * om(y) * fv(&p[..n]);
        }
        acc
    };
    let phi = |t: f64| if abs { kernel.eval(t).abs() } else { kernel.eval(t) };
    let s = sum_octaves(lo, hi, octave_of(r), "H_{Φ,Ω} f(x)", |k| {
        kernel.octave_integral(k, &grid.radial, &breaks, |t| phi(t) / t * inner(t))
    })?;
    Ok(Estimate {
        value: s.value,
        error: s.error,
    })
}

/// `H_{Φ,A} f(x) = ∫_{R^n} Φ(y)/|y|^n f(A(y) x) dy`.
pub fn apply_matrix_hausdorff(
    kernel: &RadialKernel,
    field: &MatrixField,
    f: &SampledFunction,
    x: &[f64],
    grid: &Grid,
) -> Result<Estimate> {
    apply_matrix_restricted(kernel, field, f, x, grid, Restriction::default())
}

/// [`apply_matrix_hausdorff`] with `y` restricted to the shell
/// `{2^{k-1} < ‖A⁻¹(y)‖ <= 2^k}`; membership is decided per node.
pub fn apply_matrix_restricted(
    kernel: &RadialKernel,
    field: &MatrixField,
    f: &SampledFunction,
    x: &[f64],
    grid: &Grid,
    restrict: Restriction,
) -> Result<Estimate> {
    let n = grid.dim();
    if f.dim() != n || x.len() != n || field.dim() != n {
        return Err(invalid("dimension mismatch between function, field, point and grid"));
    }
    if norm(x) == 0.0 {
        return Err(invalid("Hausdorff operators are evaluated at x != 0 only"));
    }
    if kernel.is_zero() || f.is_zero() {
        return Ok(Estimate::exact(0.0));
    }
    let abs = restrict.absolute;
    let (tl, th) = kernel.support();
    let mut breaks = field.level_radii(norm(x), &radial_edges(f));
    breaks.extend(field.shell_breaks(tl.unwrap_or(0.0), th.unwrap_or(f64::INFINITY)));
    let smeasure = grid.sphere.measure();
    let mut failure = None;
    let mut value_at = |y: &[f64]| -> f64 {
        let m = match field.matrix(y) {
            Ok(m) => m,
            Err(e) => {
                failure.get_or_insert(e);
                return 0.0;
            }
        };
        if let Some(k) = restrict.octave {
            let inside = m.inverse().is_some_and(|inv| octave_of(inv.norm()) == k);
            if !inside {
                return 0.0;
            }
        }
        let v = f.eval(&m.apply(x)[..n]);
        if abs {
            v.abs()
        } else {
            v
        }
    };
    let (lo, hi) = kernel.support_octaves();
    let s = sum_octaves(lo, hi, 0, "H_{Φ,A} f(x)", |k| {
        kernel.octave_integral(k, &grid.radial, &breaks, |t| {
            let phi = kernel.eval(t);
            if phi == 0.0 {
                return 0.0;
            }
            let phi = if abs { phi.abs() } else { phi };
            if field.is_radial() {
                let mut y = [0.0; 3];
                y[0] = t;
                phi / t * smeasure * value_at(&y[..n])
            } else {
                let mut acc = 0.0;
                for (yp, w) in grid.sphere.nodes() {
                    let mut y = [0.0; 3];
                    for i in 0..n {
                        y[i] = t * yp[i];
                    }
                    acc += w * value_at(&y[..n]);
                }
                phi / t * acc
            }
        })
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(Estimate {
        value: s.value,
        error: s.error,
    })
}
