//! Radial weights on `R^n`: power laws `|x|^β` and tabulated profiles.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::function::{interp_linear, norm};
use crate::quadrature::{
    octave_bounds, octave_of, segments, sphere_measure, unit_ball_volume, Estimate, RadialGrid, Rule,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum WeightSpec {
    Power {
        beta: f64,
        dim: usize,
    },
    Table {
        nodes: Vec<f64>,
        values: Vec<f64>,
        #[serde(default = "one")]
        dim: usize,
    },
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq)]
enum Kind {
    Power(f64),
    Table { nodes: Vec<f64>, values: Vec<f64> },
}

/// A radial weight `ω(x) = w(|x|)`.
///
/// Tables interpolate linearly between nodes and extend by the end values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WeightSpec", into = "WeightSpec")]
pub struct Weight {
    kind: Kind,
    dim: usize,
}

impl TryFrom<WeightSpec> for Weight {
    type Error = Error;
    fn try_from(spec: WeightSpec) -> Result<Self> {
        match spec {
            WeightSpec::Power { beta, dim } => Weight::power(beta, dim),
            WeightSpec::Table { nodes, values, dim } => Weight::table(nodes, values, dim),
        }
    }
}

impl From<Weight> for WeightSpec {
    fn from(w: Weight) -> Self {
        match w.kind {
            Kind::Power(beta) => WeightSpec::Power { beta, dim: w.dim },
            Kind::Table { nodes, values } => WeightSpec::Table {
                nodes,
                values,
                dim: w.dim,
            },
        }
    }
}

fn check_dim(dim: usize) -> Result<()> {
    match dim {
        1..=3 => Ok(()),
        _ => Err(Error::Unsupported(format!("dimension {dim} (only 1, 2, 3)"))),
    }
}

impl Weight {
    pub fn power(beta: f64, dim: usize) -> Result<Self> {
        check_dim(dim)?;
        if !beta.is_finite() || beta <= -(dim as f64) {
            return Err(Error::InvalidWeight(format!(
                "|x|^{beta} is not locally integrable in dimension {dim} (need beta > -{dim})"
            )));
        }
        Ok(Self {
            kind: Kind::Power(beta),
            dim,
        })
    }

    /// Lebesgue measure as a weight.
    pub fn unit(dim: usize) -> Result<Self> {
        Self::power(0.0, dim)
    }

    pub fn table(nodes: Vec<f64>, values: Vec<f64>, dim: usize) -> Result<Self> {
        check_dim(dim)?;
        if nodes.is_empty() || nodes.len() != values.len() {
            return Err(Error::InvalidWeight(
                "table needs matching, nonempty nodes and values".into(),
            ));
        }
        if nodes[0] < 0.0 || nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidWeight(
                "table nodes must be nonnegative and strictly increasing".into(),
            ));
        }
        if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidWeight("table values must be positive and finite".into()));
        }
        Ok(Self {
            kind: Kind::Table { nodes, values },
            dim,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Exponent of a power weight.
    pub fn beta(&self) -> Option<f64> {
        match self.kind {
            Kind::Power(b) => Some(b),
            Kind::Table { .. } => None,
        }
    }

    /// Exponent for formulas that only hold for power weights.
    pub fn require_beta(&self, what: &str) -> Result<f64> {
        self.beta()
            .ok_or_else(|| Error::Unsupported(format!("{what} needs power weights")))
    }

    /// Kinks of the radial profile, for quadrature break points.
    pub fn breakpoints(&self) -> &[f64] {
        match &self.kind {
            Kind::Power(_) => &[],
            Kind::Table { nodes, .. } => nodes,
        }
    }

    #[inline]
    pub fn eval_radial(&self, r: f64) -> f64 {
        match &self.kind {
            Kind::Power(b) => {
                if *b == 0.0 {
                    1.0
                } else {
                    r.powf(*b)
                }
            }
            Kind::Table { nodes, values } => {
                if r <= nodes[0] {
                    values[0]
                } else if r >= nodes[nodes.len() - 1] {
                    values[values.len() - 1]
                } else {
                    interp_linear(nodes, values, r).unwrap_or(values[0])
                }
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.eval_radial(norm(x))
    }

    /// `ω(B(0, R))`. Closed form for power weights; piecewise-polynomial
    /// quadrature (exact up to rounding) for tables.
    pub fn ball_measure(&self, radius: f64) -> f64 {
        let n = self.dim as f64;
        let sigma = sphere_measure(self.dim).expect("dimension checked at construction");
        match &self.kind {
            Kind::Power(b) => sigma * radius.powf(n + b) / (n + b),
            Kind::Table { nodes, values } => {
                let r0 = nodes[0].min(radius);
                let mut total = sigma * values[0] * r0.powf(n) / n;
                if radius > nodes[0] {
                    let rule = Rule::gauss_legendre(4);
                    for (a, b) in segments(nodes[0], radius, nodes) {
                        total += sigma * rule.integrate(a, b, |r| self.eval_radial(r) * r.powi(self.dim as i32 - 1));
                    }
                }
                total
            }
        }
    }

    /// `ω(B_k)` with `B_k = B(0, 2^k)`.
    pub fn dyadic_ball(&self, k: i32) -> f64 {
        self.ball_measure(octave_bounds(k).1)
    }
}

/// A closed ball: dyadic `B_k` centred at the origin, or explicit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Ball {
    Dyadic { k: i32 },
    Explicit { radius: f64, center: Vec<f64> },
}

impl Ball {
    pub fn radius(&self) -> f64 {
        match self {
            Ball::Dyadic { k } => octave_bounds(*k).1,
            Ball::Explicit { radius, .. } => *radius,
        }
    }

    /// Distance from the centre to the origin.
    pub fn center_distance(&self) -> f64 {
        match self {
            Ball::Dyadic { .. } => 0.0,
            Ball::Explicit { center, .. } => norm(center),
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if let Ball::Explicit { radius, center } = self {
            if !(*radius > 0.0 && radius.is_finite()) {
                return Err(invalid("ball radius must be positive"));
            }
            if center.len() != dim {
                return Err(invalid("ball centre has the wrong dimension"));
            }
        }
        Ok(())
    }
}

/// `ω(B)`. Exact for origin-centred balls; otherwise a spherical-cap
/// quadrature with error estimate.
pub fn ball_weight(w: &Weight, b: &Ball) -> Result<Estimate> {
    b.validate(w.dim)?;
    if b.center_distance() == 0.0 {
        return Ok(Estimate::exact(w.ball_measure(b.radius())));
    }
    radial_ball_integral(
        |r| w.eval_radial(r),
        w.dim,
        b.center_distance(),
        b.radius(),
        &RadialGrid::default(),
    )
}

/// Origin-centred `ω(B(0, R))` by octave quadrature down to the point where
/// the remaining inner ball is below `1e-12` of the total; the inner ball is
/// estimated by power-law extrapolation and reported as error.
pub fn ball_weight_quadrature(w: &Weight, radius: f64, grid: &RadialGrid) -> Result<Estimate> {
    if !(radius > 0.0) {
        return Err(invalid("ball radius must be positive"));
    }
    radial_ball_integral(|r| w.eval_radial(r), w.dim, 0.0, radius, grid)
}

/// `ω(C_k)` with `C_k = B_k \ B_{k-1}`.
pub fn annulus_weight(w: &Weight, k: i32) -> f64 {
    match w.kind {
        Kind::Power(b) => {
            let e = w.dim as f64 + b;
            let sigma = sphere_measure(w.dim).expect("dimension checked at construction");
            sigma / e * 2f64.powf(k as f64 * e) * (1.0 - 2f64.powf(-e))
        }
        Kind::Table { .. } => (w.dyadic_ball(k) - w.dyadic_ball(k - 1)).max(0.0),
    }
}

/// Whether `|x|^β ∈ A_p(R^n)`.
pub fn check_ap_power(beta: f64, n: usize, p: f64) -> Result<bool> {
    if !(p >= 1.0) {
        return Err(invalid(format!("A_p needs p >= 1, got {p}")));
    }
    let nf = n as f64;
    Ok(if p == 1.0 {
        -nf < beta && beta <= 0.0
    } else {
        -nf < beta && beta < nf * (p - 1.0)
    })
}

/// Critical reverse-Hölder index of `|x|^β`, `β ∈ (-n, 0]`.
pub fn reverse_holder_index_power(beta: f64, n: usize) -> Result<f64> {
    let nf = n as f64;
    if beta > 0.0 {
        return Err(Error::Unsupported("reverse Hölder index for beta > 0".into()));
    }
    if beta <= -nf {
        return Err(Error::InvalidWeight(format!("beta {beta} <= -{n}")));
    }
    Ok(if beta == 0.0 { f64::INFINITY } else { nf / -beta })
}

/// The `A_p` quantity of `w` on ball `b`:
/// `(avg_B ω)(avg_B ω^{-1/(p-1)})^{p-1}` for `p > 1`, and
/// `(avg_B ω) / essinf_B ω` for `p = 1`.
///
/// The essential infimum is the minimum over the quadrature nodes and the
/// radial endpoints, so the `p = 1` value is an upper-bound approximation.
pub fn muckenhoupt_quantity(w: &Weight, b: &Ball, p: f64) -> Result<Estimate> {
    muckenhoupt_quantity_with(w, b, p, &RadialGrid::default())
}

pub fn muckenhoupt_quantity_with(w: &Weight, b: &Ball, p: f64, grid: &RadialGrid) -> Result<Estimate> {
    if !(p >= 1.0) {
        return Err(invalid(format!("A_p needs p >= 1, got {p}")));
    }
    b.validate(w.dim)?;
    if w.beta() == Some(0.0) {
        return Ok(Estimate::exact(1.0));
    }
    let (d, radius) = (b.center_distance(), b.radius());
    let volume = unit_ball_volume(w.dim)? * radius.powi(w.dim as i32);
    let avg_w = {
        let e = radial_ball_integral(|r| w.eval_radial(r), w.dim, d, radius, grid)?;
        Estimate {
            value: e.value / volume,
            error: e.error / volume,
        }
    };
    if p == 1.0 {
        let lo = (d - radius).max(0.0);
        let hi = d + radius;
        let start = if lo > 0.0 {
            lo
        } else {
            octave_bounds(grid.k_min).0.min(hi / 2.0)
        };
        let mut inf = w.eval_radial(hi).min(w.eval_radial(lo));
        let breaks: Vec<f64> = (octave_of(start)..=octave_of(hi)).map(|k| octave_bounds(k).1).collect();
        grid.for_each_node(start, hi, &breaks, |r, _| inf = inf.min(w.eval_radial(r)));
        if inf == 0.0 {
            return Ok(Estimate {
                value: f64::INFINITY,
                error: f64::INFINITY,
            });
        }
        return Ok(Estimate {
            value: avg_w.value / inf,
            error: avg_w.error / inf,
        });
    }
    let e = -1.0 / (p - 1.0);
    let dual = radial_ball_integral(|r| w.eval_radial(r).powf(e), w.dim, d, radius, grid)?;
    let avg_dual = dual.value / volume;
    let value = avg_w.value * avg_dual.powf(p - 1.0);
    let rel = avg_w.error / avg_w.value.abs().max(f64::MIN_POSITIVE)
        + (p - 1.0) * dual.error / dual.value.abs().max(f64::MIN_POSITIVE);
    Ok(Estimate {
        value,
        error: value * rel,
    })
}

/// `∫_{B(c, R)} g(|x|) dx` with `|c| = d`, by integrating `g(r)` against the
/// measure of the part of the sphere of radius `r` inside the ball.
///
/// The full-sphere part `r <= R - d` (when the ball contains the origin) is an
/// octave sum continued downward until the power-law extrapolated remainder is
/// below `1e-12` of the total. The cap part is split at points graded toward
/// both ends, where the cap measure has square-root behaviour.
pub fn radial_ball_integral(
    g: impl Fn(f64) -> f64,
    dim: usize,
    d: f64,
    radius: f64,
    grid: &RadialGrid,
) -> Result<Estimate> {
    let n = dim as i32;
    let sigma = sphere_measure(dim)?;
    let mut total = Estimate::exact(0.0);
    let inner = radius - d;
    if inner > 0.0 {
        let shell = |r: f64| sigma * g(r) * r.powi(n - 1);
        let mut hi = inner;
        let mut octaves = 0usize;
        loop {
            let lo = hi / 2.0;
            let e = grid.integrate(lo, hi, &[], shell)?;
            total = total + e;
            octaves += 1;
            // g ~ g(lo) (r/lo)^s near the origin
            let s = (g(lo) / g(lo / 2.0)).log2();
            let exponent = dim as f64 + s;
            let remainder = if exponent > 0.0 && s.is_finite() {
                sigma * g(lo) * lo.powi(n) / exponent
            } else {
                f64::INFINITY
            };
            if remainder <= 1e-12 * total.value.abs() {
                total.error += remainder;
                break;
            }
            if octaves >= 400 || !remainder.is_finite() {
                if remainder.is_finite() {
                    total.error += remainder;
                    break;
                }
                return Err(Error::Divergent {
                    what: "weight integral near the origin".into(),
                    partial: total.value,
                    octaves,
                });
            }
            hi = lo;
        }
    }
    if d > 0.0 {
        let a = inner.abs();
        let b = d + radius;
        let cap = |r: f64| -> f64 {
            let u = ((r * r + d * d - radius * radius) / (2.0 * r * d)).clamp(-1.0, 1.0);
            match dim {
                1 => {
                    let near = ((r - d).abs() <= radius) as u8 as f64;
                    let far = ((r + d) <= radius) as u8 as f64;
                    near + far
                }
                2 => 2.0 * u.acos(),
                _ => 2.0 * std::f64::consts::PI * (1.0 - u),
            }
        };
        let integrand = |r: f64| cap(r) * g(r) * r.powi(n - 1);
        let breaks = graded(a, b, 12);
        total = total + grid.integrate(a, b, &breaks, integrand)?;
    }
    Ok(total)
}

fn graded(a: f64, b: f64, levels: i32) -> Vec<f64> {
    let h = b - a;
    (1..=levels)
        .flat_map(|j| {
            let t = h * 2f64.powi(-j);
            [a + t, b - t]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn ball_weight_examples() {
        let w = Weight::unit(1).unwrap();
        assert_eq!(ball_weight(&w, &Ball::Dyadic { k: 0 }).unwrap().value, 2.0);
        let w = Weight::unit(2).unwrap();
        assert_relative_eq!(w.dyadic_ball(0), PI, max_relative = 1e-15);
        let w = Weight::power(-1.0, 2).unwrap();
        assert_relative_eq!(w.dyadic_ball(1), 4.0 * PI, max_relative = 1e-15);
        let q = ball_weight_quadrature(&w, 2.0, &RadialGrid::default()).unwrap();
        assert_relative_eq!(q.value, 4.0 * PI, max_relative = 1e-8);
    }

    #[test]
    fn annulus_examples() {
        let w = Weight::unit(1).unwrap();
        assert_relative_eq!(annulus_weight(&w, 0), 1.0, max_relative = 1e-15);
        assert_relative_eq!(annulus_weight(&w, 3), 8.0, max_relative = 1e-15);
        let w = Weight::power(-1.0, 2).unwrap();
        assert_relative_eq!(annulus_weight(&w, 1), 2.0 * PI, max_relative = 1e-15);
    }

    #[test]
    fn invalid_weights_are_rejected() {
        assert!(Weight::power(-2.0, 2).is_err());
        assert!(Weight::power(-1.5, 1).is_err());
        assert!(Weight::power(0.0, 4).is_err());
        assert!(Weight::table(vec![1.0, 0.5], vec![1.0, 1.0], 1).is_err());
        assert!(Weight::table(vec![1.0, 2.0], vec![1.0, 0.0], 1).is_err());
    }

    #[test]
    fn ap_examples() {
        assert!(check_ap_power(0.0, 2, 1.0).unwrap());
        assert!(!check_ap_power(-2.0, 2, 1.0).unwrap());
        assert!(!check_ap_power(1.0, 1, 2.0).unwrap());
        assert!(check_ap_power(0.0, 1, 0.5).is_err());
    }

    #[test]
    fn reverse_holder_examples() {
        assert_eq!(reverse_holder_index_power(0.0, 3).unwrap(), f64::INFINITY);
        assert_eq!(reverse_holder_index_power(-1.0, 2).unwrap(), 2.0);
        assert_eq!(
            reverse_holder_index_power(-1.0, 1).unwrap_err().to_string(),
            "invalid weight: beta -1 <= -1"
        );
        assert!(matches!(reverse_holder_index_power(0.5, 1), Err(Error::Unsupported(_))));
    }

    #[test]
    fn muckenhoupt_examples() {
        let w = Weight::unit(2).unwrap();
        let b = Ball::Explicit {
            radius: 0.3,
            center: vec![1.0, 2.0],
        };
        assert_eq!(muckenhoupt_quantity(&w, &b, 2.0).unwrap().value, 1.0);
        assert_eq!(muckenhoupt_quantity(&w, &b, 1.0).unwrap().value, 1.0);
        // ∫_{-1}^{1}|x|^{-1/2} = 4 and ∫|x|^{1/2} = 4/3, averages over length 2
        let w = Weight::power(-0.5, 1).unwrap();
        let q = muckenhoupt_quantity(&w, &Ball::Dyadic { k: 0 }, 2.0).unwrap();
        assert_relative_eq!(q.value, 2.0 * (2.0 / 3.0), max_relative = 1e-9);
    }

    #[test]
    fn shifted_ball_matches_centered_measure_for_lebesgue() {
        for dim in 1..=3 {
            let w = Weight::unit(dim).unwrap();
            let center = vec![0.7; dim];
            let b = Ball::Explicit { radius: 1.5, center };
            let got = ball_weight(&w, &b).unwrap().value;
            assert_relative_eq!(got, w.ball_measure(1.5), max_relative = 1e-9);
        }
    }

    #[test]
    fn table_weight_round_trips_json() {
        let w: Weight = serde_json::from_str(r#"{"kind":"table","nodes":[1,2],"values":[1,3]}"#).unwrap();
        assert_eq!(w.eval_radial(1.5), 2.0);
        assert_eq!(w.eval_radial(0.1), 1.0);
        let back: Weight = serde_json::from_str(&serde_json::to_string(&w).unwrap()).unwrap();
        assert_eq!(back, w);
        let p: Weight = serde_json::from_str(r#"{"kind":"power","beta":-1.0,"dim":2}"#).unwrap();
        assert_eq!(p.beta(), Some(-1.0));
    }

    #[test]
    fn table_ball_measure_is_exact_for_linear_profile() {
        // w(r) = r on [1, 2], constant 1 below; in 1-D: 2(1 + (4 - 1)/2) = 5
        let w = Weight::table(vec![1.0, 2.0], vec![1.0, 2.0], 1).unwrap();
        assert_relative_eq!(w.ball_measure(2.0), 5.0, max_relative = 1e-14);
    }
}
