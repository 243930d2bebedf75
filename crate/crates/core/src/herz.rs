//! Two-weighted Herz norms over dyadic annuli and finite atomic norms.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atoms::{validate_atom, validate_dyadic_unit, Atom, DyadicUnit, Tolerances};
use crate::error::{invalid, Error, Result};
use crate::function::SampledFunction;
use crate::quadrature::{octave_bounds, polar_integrate, Grid, Truncation};
use crate::weights::Weight;

/// Parameters `(α, p, q, n, ω₁, ω₂)` of the space `K̇^{α,p}_q(ω₁, ω₂)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HerzParams {
    pub alpha: f64,
    pub p: f64,
    pub q: f64,
    pub dim: usize,
    pub w1: Weight,
    pub w2: Weight,
}

impl HerzParams {
    pub fn new(alpha: f64, p: f64, q: f64, dim: usize, w1: Weight, w2: Weight) -> Result<Self> {
        let hp = Self {
            alpha,
            p,
            q,
            dim,
            w1,
            w2,
        };
        hp.validate()?;
        Ok(hp)
    }

    /// Unweighted parameters.
    pub fn lebesgue(alpha: f64, p: f64, q: f64, dim: usize) -> Result<Self> {
        Self::new(alpha, p, q, dim, Weight::unit(dim)?, Weight::unit(dim)?)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dim) {
            return Err(Error::Unsupported(format!("dimension {} (only 1, 2, 3)", self.dim)));
        }
        if !(self.p > 0.0 && self.p.is_finite()) {
            return Err(invalid(format!("p must be positive, got {}", self.p)));
        }
        if !(self.q >= 1.0 && self.q.is_finite()) {
            return Err(invalid(format!("q must be at least 1, got {}", self.q)));
        }
        if !self.alpha.is_finite() {
            return Err(invalid("alpha must be finite"));
        }
        if self.w1.dim() != self.dim || self.w2.dim() != self.dim {
            return Err(invalid("weight dimensions must match the space dimension"));
        }
        Ok(())
    }

    /// `n(1 - 1/q)`, the least admissible `α` for atoms.
    pub fn alpha_floor(&self) -> f64 {
        self.dim as f64 * (1.0 - 1.0 / self.q)
    }

    /// Whether central atoms exist for these parameters.
    pub fn check_atomic(&self) -> Result<()> {
        if self.q <= 1.0 {
            return Err(invalid("atoms need q > 1"));
        }
        if self.alpha < self.alpha_floor() - 1e-12 {
            return Err(invalid(format!(
                "atoms need alpha >= n(1 - 1/q) = {}, got {}",
                self.alpha_floor(),
                self.alpha
            )));
        }
        Ok(())
    }

    /// `⌊α - n(1 - 1/q)⌋`, clamped at zero.
    pub fn default_moment_order(&self) -> usize {
        let x = self.alpha - self.alpha_floor();
        (x + 1e-12).floor().max(0.0) as usize
    }

    /// `ω₁(B_k)^{-α/n}`, the size bound of an atom supported in `B_k`.
    pub fn size_bound(&self, k: i32) -> f64 {
        self.w1.dyadic_ball(k).powf(-self.alpha / self.dim as f64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    Whole,
    /// `B_k = {|x| <= 2^k}`.
    Ball {
        k: i32,
    },
    /// `C_k = {2^{k-1} < |x| <= 2^k}`.
    Annulus {
        k: i32,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub value: f64,
    pub error: f64,
    pub truncation: Option<Truncation>,
}

/// `(∫_region |f|^q ω)^{1/q}`.
pub fn weighted_lq_norm(f: &SampledFunction, q: f64, w: &Weight, region: Region, grid: &Grid) -> Result<NormEstimate> {
    if !(q >= 1.0) {
        return Err(invalid(format!("q must be at least 1, got {q}")));
    }
    if f.dim() != w.dim() || f.dim() != grid.dim() {
        return Err(invalid("function, weight and grid dimensions differ"));
    }
    let zero = NormEstimate {
        value: 0.0,
        error: 0.0,
        truncation: None,
    };
    let Some((lo, hi)) = f.octaves() else {
        return Ok(zero);
    };
    let (lo, hi) = match region {
        Region::Whole => (lo, hi),
        Region::Ball { k } => (lo, hi.min(k)),
        Region::Annulus { k } => {
            if lo.is_some_and(|l| l > k) || hi < k {
                return Ok(zero);
            }
            (Some(k), k)
        }
    };
    if lo.is_some_and(|l| l > hi) {
        return Ok(zero);
    }
    let radial = &grid.radial;
    let ilo = lo.unwrap_or(radial.k_min).max(radial.k_min);
    let ihi = hi.min(radial.k_max);
    let truncation = (lo.is_none_or(|l| l < radial.k_min) || hi > radial.k_max).then_some(Truncation {
        declared_lo: lo,
        declared_hi: hi,
        integrated_lo: ilo,
        integrated_hi: ihi,
    });
    if ilo > ihi {
        return Ok(NormEstimate { truncation, ..zero });
    }
    let mut breaks = f.breakpoints().to_vec();
    breaks.extend_from_slice(w.breakpoints());
    let n = f.dim();
    let est = polar_integrate(radial, &grid.sphere, ilo, ihi, &breaks, f.is_radial(), true, |r, y| {
        let mut x = [0.0; 3];
        for i in 0..n {
            x[i] = r * y[i];
        }
        let v = f.eval(&x[..n]).abs();
        if v == 0.0 {
            0.0
        } else {
            v.powf(q) * w.eval_radial(r)
        }
    })?;
    let value = est.value.max(0.0).powf(1.0 / q);
    let error = if value > 0.0 {
        est.error / (q * value.powf(q - 1.0))
    } else {
        est.error.powf(1.0 / q)
    };
    Ok(NormEstimate {
        value,
        error,
        truncation,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnulusTerm {
    pub k: i32,
    /// `ω₁(B_k)^{α/n}`.
    pub weight_factor: f64,
    /// `‖f χ_k‖_{L^q(ω₂)}`.
    pub lq_norm: f64,
    /// `weight_factor · lq_norm`.
    pub term: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HerzNorm {
    pub value: f64,
    pub per_annulus: Vec<AnnulusTerm>,
    /// Estimated contribution of the annuli outside the summed range, in
    /// norm units. Zero when the declared support lies inside the range.
    pub tail_estimate: f64,
    pub quadrature_error: f64,
}

/// Default summation range: the declared support plus one guard octave on
/// each side, with the grid's `k_min` standing in when the support reaches
/// the origin.
pub fn default_k_range(f: &SampledFunction, grid: &Grid) -> Option<(i32, i32)> {
    let (lo, hi) = f.octaves()?;
    Some((lo.map_or(grid.radial.k_min, |l| l - 1), hi + 1))
}

/// The truncated Herz norm `(∑_{k in range} ω₁(B_k)^{αp/n} ‖f χ_k‖^p_{L^q(ω₂)})^{1/p}`.
pub fn herz_norm(f: &SampledFunction, hp: &HerzParams, k_range: Option<(i32, i32)>, grid: &Grid) -> Result<HerzNorm> {
    hp.validate()?;
    let empty = HerzNorm {
        value: 0.0,
        per_annulus: Vec::new(),
        tail_estimate: 0.0,
        quadrature_error: 0.0,
    };
    let Some((s_lo, s_hi)) = f.octaves() else {
        return Ok(empty);
    };
    let Some((lo, hi)) = k_range.or_else(|| default_k_range(f, grid)) else {
        return Ok(empty);
    };
    if lo > hi {
        return Err(invalid(format!("empty k range [{lo}, {hi}]")));
    }
    let grid = if grid.radial.k_min > lo || grid.radial.k_max < hi {
        Grid {
            radial: grid
                .radial
                .with_range(grid.radial.k_min.min(lo), grid.radial.k_max.max(hi)),
            sphere: grid.sphere.clone(),
        }
    } else {
        grid.clone()
    };
    let n = hp.dim as f64;
    let terms: Vec<(AnnulusTerm, f64)> = (lo..=hi)
        .into_par_iter()
        .map(|k| {
            let norm = weighted_lq_norm(f, hp.q, &hp.w2, Region::Annulus { k }, &grid)?;
            let factor = hp.w1.dyadic_ball(k).powf(hp.alpha / n);
            Ok((
                AnnulusTerm {
                    k,
                    weight_factor: factor,
                    lq_norm: norm.value,
                    term: factor * norm.value,
                },
                factor * norm.error,
            ))
        })
        .collect::<Result<_>>()?;
    let p = hp.p;
    let sum: f64 = terms.iter().map(|(t, _)| t.term.powf(p)).sum();
    let quad_err: f64 = terms.iter().map(|(_, e)| e).sum();

    let below = s_lo.is_none_or(|l| l < lo);
    let above = s_hi > hi;
    let mut tail = 0.0;
    if below || above {
        let contributions: Vec<f64> = terms.iter().map(|(t, _)| t.term.powf(p)).collect();
        let geometric = |a: f64, b: f64| -> Option<f64> {
            // a is the outermost computed term, b its inner neighbour
            if a == 0.0 {
                return Some(0.0);
            }
            let ratio = a / b;
            (b > 0.0 && ratio < 0.95).then(|| a * ratio / (1.0 - ratio))
        };
        let demand = || Error::TruncatedSupport {
            support_lo: s_lo.unwrap_or(i32::MIN),
            support_hi: s_hi,
            range_lo: lo,
            range_hi: hi,
        };
        if contributions.len() < 2 {
            return Err(demand());
        }
        if below {
            tail += geometric(contributions[0], contributions[1]).ok_or_else(demand)?;
        }
        if above {
            let m = contributions.len();
            tail += geometric(contributions[m - 1], contributions[m - 2]).ok_or_else(demand)?;
        }
        if tail > 1e-3 * sum {
            return Err(demand());
        }
    }
    let value = sum.powf(1.0 / p);
    Ok(HerzNorm {
        value,
        tail_estimate: (sum + tail).powf(1.0 / p) - value,
        quadrature_error: quad_err,
        per_annulus: terms.into_iter().map(|(t, _)| t).collect(),
    })
}

/// `(∑ |λ_j|^p)^{1/p}`.
pub fn lp_sum(coefficients: impl IntoIterator<Item = f64>, p: f64) -> f64 {
    coefficients
        .into_iter()
        .map(|c| c.abs().powf(p))
        .sum::<f64>()
        .powf(1.0 / p)
}

/// `(∑ |λ_j|^p)^{1/p}` of the given atomic representation, after checking
/// that every atom is a central atom. An upper bound for the atomic norm.
pub fn finite_atomic_norm(decomp: &[(f64, &Atom)], p: f64, hp: &HerzParams, tols: &Tolerances) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(invalid(format!("atomic norms need p in (0, 1], got {p}")));
    }
    for (_, a) in decomp {
        validate_atom(a, hp, tols)?.into_result()?;
    }
    Ok(lp_sum(decomp.iter().map(|(c, _)| *c), p))
}

/// `(∑ |λ_k|^p)^{1/p}` of a block representation by dyadic units.
pub fn block_norm_upper_bound(units: &[(f64, &DyadicUnit)], p: f64, hp: &HerzParams, tols: &Tolerances) -> Result<f64> {
    if !(p > 0.0) {
        return Err(invalid(format!("p must be positive, got {p}")));
    }
    for (_, u) in units {
        validate_dyadic_unit(u, hp, tols)?.into_result()?;
    }
    Ok(lp_sum(units.iter().map(|(c, _)| *c), p))
}

/// Radius of the outer edge of `B_k`.
pub fn ball_radius(k: i32) -> f64 {
    octave_bounds(k).1
}
