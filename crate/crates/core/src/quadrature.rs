//! Deterministic quadrature on dyadic octaves, on the unit sphere, and on
//! `R^n` in polar form.
//!
//! Every radial integral is organised by octaves `(2^{k-1}, 2^k]`. Octave
//! boundaries are natural break points: characteristic functions of annuli
//! never straddle a jump inside a panel, and no node is ever placed at the
//! origin. Extra break points (kernel jumps, atom edges) split an octave into
//! sub-panels, each integrated with the same rule.

use std::f64::consts::PI;
use std::num::NonZeroUsize;
use std::sync::Arc;

use gauss_quad::legendre::GaussLegendre;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::function::SampledFunction;

/// Lower and upper radius of octave `k`, i.e. `(2^{k-1}, 2^k]`.
pub fn octave_bounds(k: i32) -> (f64, f64) {
    (2f64.powi(k - 1), 2f64.powi(k))
}

/// Octave index containing radius `r > 0`: the `k` with `2^{k-1} < r <= 2^k`.
pub fn octave_of(r: f64) -> i32 {
    let k = r.log2().ceil() as i32;
    // guard against log2 rounding right at a power of two
    if r <= 2f64.powi(k - 1) {
        k - 1
    } else if r > 2f64.powi(k) {
        k + 1
    } else {
        k
    }
}

/// A value together with an estimate of its absolute error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { value, error: 0.0 }
    }
}

impl std::ops::Add for Estimate {
    type Output = Estimate;
    fn add(self, rhs: Estimate) -> Estimate {
        Estimate {
            value: self.value + rhs.value,
            error: self.error + rhs.error,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    #[default]
    GaussLegendre,
    Simpson,
}

/// Nodes and weights of a rule on the reference interval `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct Rule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Rule {
    pub fn gauss_legendre(n: usize) -> Self {
        let degree = NonZeroUsize::new(n).expect("rule needs at least one node");
        let (nodes, weights) = GaussLegendre::new(degree).iter().copied().unzip();
        Self { nodes, weights }
    }

    /// Composite Simpson with `intervals` (even) sub-intervals.
    pub fn simpson(intervals: usize) -> Self {
        assert!(intervals >= 2 && intervals.is_multiple_of(2));
        let h = 2.0 / intervals as f64;
        let nodes = (0..=intervals).map(|i| -1.0 + h * i as f64).collect();
        let weights = (0..=intervals)
            .map(|i| {
                let c = if i == 0 || i == intervals {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                c * h / 3.0
            })
            .collect();
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Calls `visit(t, w)` for every node mapped onto `[a, b]`.
    #[inline]
    pub fn for_each(&self, a: f64, b: f64, mut visit: impl FnMut(f64, f64)) {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            visit(mid + half * x, half * w);
        }
    }

    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let mut sum = 0.0;
        self.for_each(a, b, |t, w| sum += w * f(t));
        sum
    }
}

/// Splits `(a, b]` at every break point strictly inside it.
pub fn segments(a: f64, b: f64, breaks: &[f64]) -> Vec<(f64, f64)> {
    let mut cuts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|&c| c > a && c < b && (c - a) > 1e-14 * b.abs() && (b - c) > 1e-14 * b.abs())
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut out = Vec::with_capacity(cuts.len() + 1);
    let mut lo = a;
    for c in cuts {
        out.push((lo, c));
        lo = c;
    }
    out.push((lo, b));
    out
}

/// Serializable grid parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSettings {
    pub k_min: i32,
    pub k_max: i32,
    pub nodes_per_octave: usize,
    pub sphere_res: usize,
    pub rule: RuleKind,
}

impl Default for GridSettings {
    fn default() -> Self {
        Self {
            k_min: -24,
            k_max: 24,
            nodes_per_octave: 16,
            sphere_res: 32,
            rule: RuleKind::GaussLegendre,
        }
    }
}

impl GridSettings {
    pub fn radial(&self) -> Result<RadialGrid> {
        RadialGrid::new(self.k_min, self.k_max, self.nodes_per_octave, self.rule)
    }

    pub fn sphere(&self, dim: usize) -> Result<SphereGrid> {
        SphereGrid::new(dim, self.sphere_res)
    }

    /// Same settings with `factor` times as many radial nodes per octave.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            nodes_per_octave: self.nodes_per_octave * factor,
            ..self.clone()
        }
    }
}

/// Octave-organised radial discretisation.
#[derive(Clone, Debug)]
pub struct RadialGrid {
    pub k_min: i32,
    pub k_max: i32,
    pub nodes_per_octave: usize,
    pub kind: RuleKind,
    fine: Arc<Rule>,
    coarse: Arc<Rule>,
}

impl Default for RadialGrid {
    fn default() -> Self {
        GridSettings::default().radial().expect("default grid is valid")
    }
}

impl RadialGrid {
    pub fn new(k_min: i32, k_max: i32, nodes_per_octave: usize, kind: RuleKind) -> Result<Self> {
        if k_min > k_max {
            return Err(invalid(format!("k_min {k_min} > k_max {k_max}")));
        }
        if nodes_per_octave < 4 {
            return Err(invalid("nodes_per_octave must be at least 4"));
        }
        let (fine, coarse) = match kind {
            RuleKind::GaussLegendre => (
                Rule::gauss_legendre(nodes_per_octave),
                Rule::gauss_legendre(nodes_per_octave / 2),
            ),
            RuleKind::Simpson => {
                if !nodes_per_octave.is_multiple_of(2) {
                    return Err(invalid("Simpson needs an even number of nodes per octave"));
                }
                let half = nodes_per_octave / 2;
                (Rule::simpson(nodes_per_octave), Rule::simpson(half + half % 2))
            }
        };
        Ok(Self {
            k_min,
            k_max,
            nodes_per_octave,
            kind,
            fine: Arc::new(fine),
            coarse: Arc::new(coarse),
        })
    }

    pub fn settings(&self, sphere_res: usize) -> GridSettings {
        GridSettings {
            k_min: self.k_min,
            k_max: self.k_max,
            nodes_per_octave: self.nodes_per_octave,
            sphere_res,
            rule: self.kind,
        }
    }

    pub fn with_range(&self, k_min: i32, k_max: i32) -> Self {
        Self {
            k_min,
            k_max,
            ..self.clone()
        }
    }

    pub fn rule(&self) -> &Rule {
        &self.fine
    }

    /// Visits every fine node in `(a, b]`, split at `breaks`.
    #[inline]
    pub fn for_each_node(&self, a: f64, b: f64, breaks: &[f64], mut visit: impl FnMut(f64, f64)) {
        if breaks.is_empty() {
            self.fine.for_each(a, b, &mut visit);
        } else {
            for (lo, hi) in segments(a, b, breaks) {
                self.fine.for_each(lo, hi, &mut visit);
            }
        }
    }

    /// Plain fine-rule sum over `(a, b]`; no error estimate.
    pub fn sum(&self, a: f64, b: f64, breaks: &[f64], mut f: impl FnMut(f64) -> f64) -> f64 {
        let mut s = 0.0;
        self.for_each_node(a, b, breaks, |t, w| s += w * f(t));
        s
    }

    /// Integral over `(a, b]` with a two-level error estimate. Non-finite
    /// samples are hard errors naming the node.
    pub fn integrate(&self, a: f64, b: f64, breaks: &[f64], mut f: impl FnMut(f64) -> f64) -> Result<Estimate> {
        let mut fine = 0.0;
        let mut coarse = 0.0;
        for (lo, hi) in segments(a, b, breaks) {
            let mut bad = None;
            self.fine.for_each(lo, hi, |t, w| {
                let v = f(t);
                if !v.is_finite() && bad.is_none() {
                    bad = Some((t, v));
                }
                fine += w * v;
            });
            if let Some((t, v)) = bad {
                return Err(Error::NonFinite {
                    location: format!("t = {t:e}"),
                    value: v,
                });
            }
            self.coarse.for_each(lo, hi, |t, w| coarse += w * f(t));
        }
        Ok(Estimate {
            value: fine,
            error: (fine - coarse).abs(),
        })
    }
}

/// Integral of `g` over octave `k`, i.e. over `(2^{k-1}, 2^k]`.
pub fn integrate_octave(g: impl FnMut(f64) -> f64, k: i32, grid: &RadialGrid) -> Result<Estimate> {
    integrate_octave_with_breaks(g, k, &[], grid)
}

pub fn integrate_octave_with_breaks(
    g: impl FnMut(f64) -> f64,
    k: i32,
    breaks: &[f64],
    grid: &RadialGrid,
) -> Result<Estimate> {
    let (a, b) = octave_bounds(k);
    grid.integrate(a, b, breaks, g)
}

/// Quadrature on `S^{n-1}` for `n` in 1..=3.
///
/// `n = 1` is the two-point set `{-1, +1}` with counting measure, `n = 2` uses
/// uniform angles, `n = 3` a Gauss-Legendre rule in the polar cosine times a
/// uniform azimuthal rule with twice as many points.
#[derive(Clone, Debug)]
pub struct SphereGrid {
    pub dim: usize,
    pub resolution: usize,
    nodes: Arc<Vec<([f64; 3], f64)>>,
}

impl SphereGrid {
    pub fn new(dim: usize, resolution: usize) -> Result<Self> {
        let nodes = match dim {
            1 => vec![([-1.0, 0.0, 0.0], 1.0), ([1.0, 0.0, 0.0], 1.0)],
            2 => {
                if resolution < 1 {
                    return Err(invalid("sphere resolution must be positive"));
                }
                let w = 2.0 * PI / resolution as f64;
                (0..resolution)
                    .map(|j| {
                        let th = w * (j as f64 + 0.5);
                        ([th.cos(), th.sin(), 0.0], w)
                    })
                    .collect()
            }
            3 => {
                if resolution < 1 {
                    return Err(invalid("sphere resolution must be positive"));
                }
                let polar = Rule::gauss_legendre(resolution);
                let naz = 2 * resolution;
                let waz = 2.0 * PI / naz as f64;
                let mut v = Vec::with_capacity(resolution * naz);
                polar.for_each(-1.0, 1.0, |c, w| {
                    let s = (1.0 - c * c).max(0.0).sqrt();
                    for j in 0..naz {
                        let ph = waz * (j as f64 + 0.5);
                        v.push(([s * ph.cos(), s * ph.sin(), c], w * waz));
                    }
                });
                v
            }
            _ => return Err(Error::Unsupported(format!("dimension {dim} (only 1, 2, 3)"))),
        };
        Ok(Self {
            dim,
            resolution,
            nodes: Arc::new(nodes),
        })
    }

    pub fn nodes(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.nodes.iter().map(move |(p, w)| (&p[..self.dim], *w))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Total measure of the discretised sphere (exactly `|S^{n-1}|`).
    pub fn measure(&self) -> f64 {
        self.nodes.iter().map(|(_, w)| w).sum()
    }
}

/// Surface measure `|S^{n-1}|` for `n` in 1..=3.
pub fn sphere_measure(dim: usize) -> Result<f64> {
    match dim {
        1 => Ok(2.0),
        2 => Ok(2.0 * PI),
        3 => Ok(4.0 * PI),
        _ => Err(Error::Unsupported(format!("dimension {dim} (only 1, 2, 3)"))),
    }
}

/// Volume of the unit ball in `R^n`.
pub fn unit_ball_volume(dim: usize) -> Result<f64> {
    Ok(sphere_measure(dim)? / dim as f64)
}

pub fn integrate_sphere(h: impl Fn(&[f64]) -> f64, grid: &SphereGrid) -> Result<f64> {
    let mut sum = 0.0;
    for (y, w) in grid.nodes() {
        let v = h(y);
        if !v.is_finite() {
            return Err(Error::NonFinite {
                location: format!("y' = {y:?}"),
                value: v,
            });
        }
        sum += w * v;
    }
    Ok(sum)
}

/// A radial grid paired with a sphere grid of matching dimension.
#[derive(Clone, Debug)]
pub struct Grid {
    pub radial: RadialGrid,
    pub sphere: SphereGrid,
}

impl Grid {
    pub fn new(settings: &GridSettings, dim: usize) -> Result<Self> {
        Ok(Self {
            radial: settings.radial()?,
            sphere: settings.sphere(dim)?,
        })
    }

    pub fn dim(&self) -> usize {
        self.sphere.dim
    }

    pub fn settings(&self) -> GridSettings {
        self.radial.settings(self.sphere.resolution)
    }
}

/// One node of a polar product rule; `weight` includes `r^{n-1}`.
#[derive(Clone, Copy, Debug)]
pub struct PolarNode {
    pub r: f64,
    pub x: [f64; 3],
    pub weight: f64,
}

/// Materialised polar product rule over octaves `lo..=hi`, split at `breaks`.
/// With `isotropic` only the ray through `e_1` is kept, carrying `|S^{n-1}|`.
pub fn polar_nodes(grid: &Grid, lo: i32, hi: i32, breaks: &[f64], isotropic: bool) -> Vec<PolarNode> {
    let n = grid.dim();
    let smeasure = grid.sphere.measure();
    let mut out = Vec::new();
    for k in lo..=hi {
        let (a, b) = octave_bounds(k);
        grid.radial.for_each_node(a, b, breaks, |r, w| {
            let jac = w * r.powi(n as i32 - 1);
            if isotropic {
                out.push(PolarNode {
                    r,
                    x: [r, 0.0, 0.0],
                    weight: jac * smeasure,
                });
            } else {
                for (y, wy) in grid.sphere.nodes() {
                    let mut x = [0.0; 3];
                    for i in 0..n {
                        x[i] = r * y[i];
                    }
                    out.push(PolarNode { r, x, weight: jac * wy });
                }
            }
        });
    }
    out
}

/// Portion of the integration domain that the octave range did not cover.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub declared_lo: Option<i32>,
    pub declared_hi: i32,
    pub integrated_lo: i32,
    pub integrated_hi: i32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolarIntegral {
    pub value: f64,
    pub error: f64,
    pub truncation: Option<Truncation>,
}

/// Shared polar engine: `sum_k ∫_{octave k} ∫_{S^{n-1}} f(r, y') r^{n-1} dy' dr`.
///
/// With `isotropic` the integrand is taken to be independent of `y'` and the
/// sphere sum collapses to `|S^{n-1}| f(r, e_1)`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn polar_integrate(
    radial: &RadialGrid,
    sphere: &SphereGrid,
    lo: i32,
    hi: i32,
    breaks: &[f64],
    isotropic: bool,
    with_error: bool,
    f: impl Fn(f64, &[f64]) -> f64,
) -> Result<Estimate> {
    let n = sphere.dim;
    let e1 = [1.0, 0.0, 0.0];
    let smeasure = sphere.measure();
    let shell = |r: f64| -> f64 {
        let jac = r.powi(n as i32 - 1);
        if isotropic {
            smeasure * f(r, &e1[..n]) * jac
        } else {
            let mut s = 0.0;
            for (y, w) in sphere.nodes() {
                s += w * f(r, y);
            }
            s * jac
        }
    };
    let mut total = Estimate::exact(0.0);
    for k in lo..=hi {
        let (a, b) = octave_bounds(k);
        if with_error {
            total = total + radial.integrate(a, b, breaks, shell)?;
        } else {
            total.value += radial.sum(a, b, breaks, shell);
        }
    }
    if !total.value.is_finite() {
        return Err(Error::NonFinite {
            location: format!("polar integral over octaves [{lo}, {hi}]"),
            value: total.value,
        });
    }
    Ok(total)
}

/// `∫_{R^n} F(x) dx` in polar form over the octaves where `F` is declared to
/// live, clipped to the grid range. Clipping is reported, never silent.
pub fn integrate_rn_polar(f: &SampledFunction, radial: &RadialGrid, sphere: &SphereGrid) -> Result<PolarIntegral> {
    if f.dim() != sphere.dim {
        return Err(invalid("function and sphere grid dimensions differ"));
    }
    let Some((lo, hi)) = f.octaves() else {
        return Ok(PolarIntegral {
            value: 0.0,
            error: 0.0,
            truncation: None,
        });
    };
    let dlo = lo.unwrap_or(radial.k_min);
    let ilo = dlo.max(radial.k_min);
    let ihi = hi.min(radial.k_max);
    let truncation = (lo.is_none_or(|l| l < radial.k_min) || hi > radial.k_max).then_some(Truncation {
        declared_lo: lo,
        declared_hi: hi,
        integrated_lo: ilo,
        integrated_hi: ihi,
    });
    if ilo > ihi {
        return Ok(PolarIntegral {
            value: 0.0,
            error: 0.0,
            truncation,
        });
    }
    let x = [0.0; 3];
    let n = f.dim();
    let est = polar_integrate(
        radial,
        sphere,
        ilo,
        ihi,
        f.breakpoints(),
        f.is_radial(),
        true,
        |r, y| {
            let mut p = x;
            for i in 0..n {
                p[i] = r * y[i];
            }
            f.eval(&p[..n])
        },
    )?;
    Ok(PolarIntegral {
        value: est.value,
        error: est.error,
        truncation,
    })
}
