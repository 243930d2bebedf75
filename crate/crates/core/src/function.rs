//! Functions on `R^n` with a declared dyadic support.

use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Result};
use crate::quadrature::{octave_bounds, octave_of};

pub type Evaluator = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A callable on `R^n` that vanishes outside the octaves `k_lo..=k_hi`.
///
/// `k_lo = None` means the support reaches the origin. Evaluation clips to the
/// declared support, so a declaration is a promise the quadrature relies on.
#[derive(Clone)]
pub struct SampledFunction {
    dim: usize,
    eval: Evaluator,
    support: Option<(Option<i32>, i32)>,
    breakpoints: Vec<f64>,
    radial: bool,
}

impl fmt::Debug for SampledFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SampledFunction")
            .field("dim", &self.dim)
            .field("support", &self.support)
            .field("breakpoints", &self.breakpoints.len())
            .field("radial", &self.radial)
            .finish()
    }
}

impl SampledFunction {
    pub fn new(
        dim: usize,
        k_lo: Option<i32>,
        k_hi: i32,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(invalid(format!("dimension {dim} (only 1, 2, 3)")));
        }
        if let Some(lo) = k_lo {
            if lo > k_hi {
                return Err(invalid(format!("support octaves [{lo}, {k_hi}] are empty")));
            }
        }
        Ok(Self {
            dim,
            eval: Arc::new(f),
            support: Some((k_lo, k_hi)),
            breakpoints: Vec::new(),
            radial: false,
        })
    }

    /// Radial function `x -> g(|x|)`.
    pub fn radial(
        dim: usize,
        k_lo: Option<i32>,
        k_hi: i32,
        g: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let mut f = Self::new(dim, k_lo, k_hi, move |x| g(norm(x)))?;
        f.radial = true;
        Ok(f)
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            eval: Arc::new(|_| 0.0),
            support: None,
            breakpoints: Vec::new(),
            radial: true,
        }
    }

    /// `c χ_{C_k}` with `C_k = {2^{k-1} < |x| <= 2^k}`.
    pub fn indicator_annulus(dim: usize, k: i32, c: f64) -> Result<Self> {
        Self::radial(dim, Some(k), k, move |_| c)
    }

    /// `c χ_{B_k}` with `B_k = {|x| <= 2^k}`.
    pub fn indicator_ball(dim: usize, k: i32, c: f64) -> Result<Self> {
        Self::radial(dim, None, k, move |_| c)
    }

    /// Piecewise-linear radial profile through `(nodes[i], values[i])`, zero
    /// outside `[nodes[0], nodes[last]]`.
    pub fn radial_table(dim: usize, nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 || nodes.len() != values.len() {
            return Err(invalid("radial table needs matching nodes/values, at least two"));
        }
        if nodes[0] < 0.0 || nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid(
                "radial table nodes must be nonnegative and strictly increasing",
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("radial table values must be finite"));
        }
        let k_lo = (nodes[0] > 0.0).then(|| octave_of(nodes[0]));
        let k_hi = octave_of(*nodes.last().unwrap());
        let breaks = nodes.clone();
        let g = move |r: f64| interp_linear(&nodes, &values, r).unwrap_or(0.0);
        Ok(Self::radial(dim, k_lo, k_hi, g)?.with_breakpoints(breaks))
    }

    pub fn with_breakpoints(mut self, mut breaks: Vec<f64>) -> Self {
        breaks.retain(|b| b.is_finite() && *b > 0.0);
        self.breakpoints.extend(breaks);
        self.breakpoints.sort_by(f64::total_cmp);
        self.breakpoints.dedup();
        self
    }

    /// Marks the function as depending on `|x|` only; quadrature then skips
    /// the sphere sum.
    pub fn assume_radial(mut self, radial: bool) -> Self {
        self.radial = radial;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_radial(&self) -> bool {
        self.radial
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// Declared support octaves, `None` for the zero function.
    pub fn octaves(&self) -> Option<(Option<i32>, i32)> {
        self.support
    }

    pub fn is_zero(&self) -> bool {
        self.support.is_none()
    }

    /// Supremum of the declared support radius.
    pub fn support_radius(&self) -> f64 {
        self.support.map_or(0.0, |(_, hi)| octave_bounds(hi).1)
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        let Some((lo, hi)) = self.support else {
            return 0.0;
        };
        let r = norm(x);
        if r > octave_bounds(hi).1 {
            return 0.0;
        }
        if let Some(lo) = lo {
            if r <= octave_bounds(lo).0 {
                return 0.0;
            }
        }
        (self.eval)(x)
    }

    /// Shares the evaluator; `eval_fn()(x)` equals `self.eval(x)`.
    pub fn eval_fn(&self) -> impl Fn(&[f64]) -> f64 + Send + Sync + 'static {
        let me = self.clone();
        move |x| me.eval(x)
    }

    pub fn scaled(&self, c: f64) -> Self {
        if c == 0.0 {
            return Self::zero(self.dim);
        }
        let f = self.clone();
        self.derive(move |x| c * f.eval(x))
    }

    pub fn abs(&self) -> Self {
        let f = self.clone();
        self.derive(move |x| f.eval(x).abs())
    }

    /// `x -> f(λ x)` for `λ > 0`.
    pub fn dilated(&self, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(invalid("dilation factor must be positive and finite"));
        }
        let Some((lo, hi)) = self.support else {
            return Ok(Self::zero(self.dim));
        };
        let (r_lo, r_hi) = (lo.map(|l| octave_bounds(l).0 / lambda), octave_bounds(hi).1 / lambda);
        let mut breaks: Vec<f64> = self.breakpoints.iter().map(|b| b / lambda).collect();
        breaks.push(r_hi);
        breaks.extend(r_lo);
        let f = self.clone();
        let mut out = Self::new(
            self.dim,
            r_lo.map(|r| octave_of(r * (1.0 + 1e-12))),
            octave_of(r_hi),
            move |x: &[f64]| {
                let mut y = [0.0; 3];
                for (yi, xi) in y.iter_mut().zip(x) {
                    *yi = lambda * xi;
                }
                f.eval(&y[..x.len()])
            },
        )?
        .with_breakpoints(breaks);
        out.radial = self.radial;
        Ok(out)
    }

    /// `∑ c_i f_i` over functions of a common dimension.
    pub fn linear_combination(terms: &[(f64, SampledFunction)]) -> Result<Self> {
        let Some((_, first)) = terms.first() else {
            return Err(invalid("empty linear combination"));
        };
        let dim = first.dim;
        if terms.iter().any(|(_, f)| f.dim != dim) {
            return Err(invalid("linear combination of functions of different dimensions"));
        }
        let live: Vec<(f64, SampledFunction)> = terms
            .iter()
            .filter(|(c, f)| *c != 0.0 && !f.is_zero())
            .cloned()
            .collect();
        if live.is_empty() {
            return Ok(Self::zero(dim));
        }
        let hi = live.iter().filter_map(|(_, f)| f.support).map(|s| s.1).max().unwrap();
        let lo = live
            .iter()
            .filter_map(|(_, f)| f.support)
            .map(|s| s.0)
            .try_fold(i32::MAX, |acc, l| l.map(|l| acc.min(l)));
        let breaks: Vec<f64> = live.iter().flat_map(|(_, f)| f.breakpoints.clone()).collect();
        let radial = live.iter().all(|(_, f)| f.radial);
        let mut out =
            Self::new(dim, lo, hi, move |x| live.iter().map(|(c, f)| c * f.eval(x)).sum())?.with_breakpoints(breaks);
        out.radial = radial;
        Ok(out)
    }

    /// Same support metadata, new evaluator.
    fn derive(&self, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            dim: self.dim,
            eval: Arc::new(f),
            support: self.support,
            breakpoints: self.breakpoints.clone(),
            radial: self.radial,
        }
    }
}

#[inline]
pub fn norm(x: &[f64]) -> f64 {
    match x.len() {
        1 => x[0].abs(),
        _ => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
    }
}

/// Linear interpolation on increasing `nodes`; `None` outside the range.
pub(crate) fn interp_linear(nodes: &[f64], values: &[f64], r: f64) -> Option<f64> {
    let last = nodes.len() - 1;
    if r < nodes[0] || r > nodes[last] {
        return None;
    }
    let i = nodes.partition_point(|&t| t <= r).clamp(1, last);
    let (x0, x1) = (nodes[i - 1], nodes[i]);
    let u = (r - x0) / (x1 - x0);
    Some(values[i - 1] + u * (values[i] - values[i - 1]))
}
