//! Per-octave coefficients, the bound constants `C1`–`C12`, and the
//! hypothesis gates of the boundedness theorems.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hausdorff::{MatrixField, OctaveSum, RadialKernel, SphereSymbol};
use crate::herz::HerzParams;
use crate::quadrature::{octave_of, Grid};
use crate::weights::{reverse_holder_index_power, Weight};

/// Default cap on `ω₂(B_k)/ω₁(B_k)` for non-power weights.
pub const DEFAULT_RATIO_CAP: f64 = 1e3;

/// Relative change of shell sums between two refinements above which the
/// `‖A⁻¹(y)‖` partition counts as unstable.
pub const SHELL_TOLERANCE: f64 = 1e-6;

/// The boundedness results the crate can check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Theorem {
    /// `H_Φ` on `HK̇^{α,p}_q(ω₁,ω₂)` into itself, compact kernel.
    HardyHardy,
    /// `H_{Φ,Ω}` into `K̇^{α,p}_q`, power weights, constant `C1`/`C2`.
    RoughPower,
    /// `H_{Φ,Ω}` into `K̇^{α,p}_q`, `ω₁ ∈ A₁`, constant `C3`/`C4`.
    RoughA1,
    /// `H_{Φ,Ω}` into `K̇^{α*,p}_{q*}`, constant `C5`/`C6`.
    RoughShift,
    /// `H_{Φ,A}` on `HK̇^{α,p}_q(ω₁,ω₂)` into itself.
    MatrixHardyHardy,
    /// `H_{Φ,A}` into `K̇^{α,p}_q`, power weights, constant `C7`/`C8`.
    MatrixPower,
    /// `H_{Φ,A}` into `K̇^{α,p}_q`, `ω₁ ∈ A₁`, constant `C9`/`C10`.
    MatrixA1,
    /// `H_{Φ,A}` into `K̇^{α*,p}_{q*}`, constant `C11`/`C12`.
    MatrixShift,
}

impl Theorem {
    pub const ALL: [Theorem; 8] = [
        Theorem::HardyHardy,
        Theorem::RoughPower,
        Theorem::RoughA1,
        Theorem::RoughShift,
        Theorem::MatrixHardyHardy,
        Theorem::MatrixPower,
        Theorem::MatrixA1,
        Theorem::MatrixShift,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Theorem::HardyHardy => "hardy_hardy",
            Theorem::RoughPower => "rough_power",
            Theorem::RoughA1 => "rough_a1",
            Theorem::RoughShift => "rough_shift",
            Theorem::MatrixHardyHardy => "matrix_hardy_hardy",
            Theorem::MatrixPower => "matrix_power",
            Theorem::MatrixA1 => "matrix_a1",
            Theorem::MatrixShift => "matrix_shift",
        }
    }

    pub fn is_matrix(self) -> bool {
        matches!(
            self,
            Theorem::MatrixHardyHardy | Theorem::MatrixPower | Theorem::MatrixA1 | Theorem::MatrixShift
        )
    }

    /// Whether the image is decomposed into atoms (as opposed to dyadic units).
    pub fn is_hardy_target(self) -> bool {
        matches!(self, Theorem::HardyHardy | Theorem::MatrixHardyHardy)
    }

    /// Whether the target space is `K̇^{α*,p}_{q*}`.
    pub fn is_shift(self) -> bool {
        matches!(self, Theorem::RoughShift | Theorem::MatrixShift)
    }

    /// Name of the governing constant for exponent `p`.
    pub fn constant_name(self, p: f64) -> &'static str {
        let one = p >= 1.0;
        match self {
            Theorem::HardyHardy => "int_phi",
            Theorem::MatrixHardyHardy => "int_phi_over_y_n",
            Theorem::RoughPower => {
                if one {
                    "C1"
                } else {
                    "C2"
                }
            }
            Theorem::RoughA1 => {
                if one {
                    "C3"
                } else {
                    "C4"
                }
            }
            Theorem::RoughShift => {
                if one {
                    "C5"
                } else {
                    "C6"
                }
            }
            Theorem::MatrixPower => {
                if one {
                    "C7"
                } else {
                    "C8"
                }
            }
            Theorem::MatrixA1 => {
                if one {
                    "C9"
                } else {
                    "C10"
                }
            }
            Theorem::MatrixShift => {
                if one {
                    "C11"
                } else {
                    "C12"
                }
            }
        }
    }
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Theorem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Theorem::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| invalid(format!("unknown theorem {s:?}")))
    }
}

/// Parameters beyond the Herz space: target indices, reverse-Hölder
/// exponents, the log exponent and matrix-field data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoremParams {
    pub hp: HerzParams,
    #[serde(default)]
    pub alpha_star: Option<f64>,
    #[serde(default)]
    pub q_star: Option<f64>,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub delta1: Option<f64>,
    #[serde(default)]
    pub delta2: Option<f64>,
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default)]
    pub rho_a: Option<f64>,
    #[serde(default)]
    pub octave_bounds: Option<(i32, i32)>,
    #[serde(default = "default_ratio_cap")]
    pub ratio_cap: f64,
}

fn default_ratio_cap() -> f64 {
    DEFAULT_RATIO_CAP
}

impl TheoremParams {
    pub fn new(hp: HerzParams) -> Self {
        Self {
            hp,
            alpha_star: None,
            q_star: None,
            delta: None,
            delta1: None,
            delta2: None,
            sigma: None,
            rho_a: None,
            octave_bounds: None,
            ratio_cap: DEFAULT_RATIO_CAP,
        }
    }

    /// `σ`, defaulting to `(1-p)/p + 1/2`.
    pub fn sigma(&self) -> f64 {
        self.sigma.unwrap_or((1.0 - self.hp.p) / self.hp.p + 0.5)
    }

    fn need(v: Option<f64>, what: &str) -> Result<f64> {
        v.ok_or_else(|| invalid(format!("{what} is required")))
    }

    pub fn delta(&self) -> Result<f64> {
        Self::need(self.delta, "delta")
    }

    pub fn alpha_star(&self) -> Result<f64> {
        Self::need(self.alpha_star, "alpha_star")
    }

    pub fn q_star(&self) -> Result<f64> {
        Self::need(self.q_star, "q_star")
    }

    /// Parameters of the target space `K̇^{α*,p}_{q*}(ω₁, ω₂)`.
    pub fn target(&self) -> Result<HerzParams> {
        HerzParams::new(
            self.alpha_star()?,
            self.hp.p,
            self.q_star()?,
            self.hp.dim,
            self.hp.w1.clone(),
            self.hp.w2.clone(),
        )
    }

    fn n(&self) -> f64 {
        self.hp.dim as f64
    }
}

/// `(γ₁, γ₂)`.
pub fn gammas(tp: &TheoremParams) -> Result<(f64, f64)> {
    let d1 = TheoremParams::need(tp.delta1, "delta1")?;
    let d2 = TheoremParams::need(tp.delta2, "delta2")?;
    let a_star = tp.alpha_star()?;
    let base = tp.n() / tp.hp.q + tp.hp.alpha;
    Ok(((d2 - 1.0) / d2 * base - a_star / d1, base + a_star / d2))
}

/// Per-octave coefficient families of the rough operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalarFamily {
    /// `λ_k`, summing to `C1`.
    Lambda,
    /// `μ_k`, summing to `C3`.
    Mu,
    /// `μ*_k`, summing to `C5`.
    MuStar,
    /// `∫ |Φ(t)| t^{(n+β₂)/q - 1} dt` per octave, the pullback factor alone.
    Pullback,
}

/// Per-shell coefficient families of the matrix operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixFamily {
    /// `θ_k`, summing to `C7`.
    Theta,
    /// `η_k`, summing to `C9`.
    Eta,
    /// `η*_k`, summing to `C11`.
    EtaStar,
    /// `‖A‖^{-β₂/q} |det A⁻¹|^{1/q}` per shell, the pullback factor alone.
    Pullback,
}

/// Exponents `(e_lo, e_hi)` applied on `(0, 1]` and `(1, ∞)`.
fn scalar_exponents(family: ScalarFamily, tp: &TheoremParams) -> Result<(f64, f64)> {
    let n = tp.n();
    let (alpha, q) = (tp.hp.alpha, tp.hp.q);
    Ok(match family {
        ScalarFamily::Lambda => {
            let b1 = tp.hp.w1.require_beta("lambda_k")?;
            let b2 = tp.hp.w2.require_beta("lambda_k")?;
            let e = (n + b2) / q + alpha + b1 * alpha / n - 1.0;
            (e, e)
        }
        ScalarFamily::Mu => {
            let b2 = tp.hp.w2.require_beta("mu_k")?;
            let d = tp.delta()?;
            let base = (n + b2) / q - 1.0;
            (base + alpha * (d - 1.0) / d, base + alpha)
        }
        ScalarFamily::MuStar => {
            let (g1, g2) = gammas(tp)?;
            (g1 - 1.0, g2 - 1.0)
        }
        ScalarFamily::Pullback => {
            let b2 = tp.hp.w2.require_beta("pullback factor")?;
            let e = (n + b2) / q - 1.0;
            (e, e)
        }
    })
}

/// `|log₂ s|^σ` for `s <= 1`, `(log₂ s + 1)^σ` above; `σ = None` gives 1.
#[inline]
fn log_factor(s: f64, sigma: Option<f64>) -> f64 {
    match sigma {
        None => 1.0,
        Some(sig) if s <= 1.0 => s.log2().abs().powf(sig),
        Some(sig) => (s.log2() + 1.0).powf(sig),
    }
}

/// Per-octave coefficients of `family`, optionally with log factors.
pub fn scalar_family(
    kernel: &RadialKernel,
    family: ScalarFamily,
    tp: &TheoremParams,
    sigma: Option<f64>,
    grid: &Grid,
) -> Result<OctaveSum> {
    let (lo, hi) = scalar_exponents(family, tp)?;
    let what = match family {
        ScalarFamily::Lambda => "sum of lambda_k",
        ScalarFamily::Mu => "sum of mu_k",
        ScalarFamily::MuStar => "sum of mu*_k",
        ScalarFamily::Pullback => "sum of pullback factors",
    };
    kernel.octave_sum(what, &grid.radial, |t| {
        let e = if t <= 1.0 { lo } else { hi };
        kernel.eval(t).abs() * t.powf(e) * log_factor(t, sigma)
    })
}

fn scalar_k(kernel: &RadialKernel, family: ScalarFamily, k: i32, tp: &TheoremParams, grid: &Grid) -> Result<f64> {
    let (lo, hi) = scalar_exponents(family, tp)?;
    let e = if k <= 0 { lo } else { hi };
    Ok(kernel
        .octave_integral(k, &grid.radial, &[], |t| kernel.eval(t).abs() * t.powf(e))?
        .value)
}

/// `λ_k = ∫_{(2^{k-1}, 2^k]} |Φ(t)| t^{(n+β₂)/q + α + β₁α/n - 1} dt`.
pub fn lambda_k(kernel: &RadialKernel, k: i32, tp: &TheoremParams, grid: &Grid) -> Result<f64> {
    scalar_k(kernel, ScalarFamily::Lambda, k, tp, grid)
}

/// `μ_k`: exponent `α(δ-1)/δ` on octaves `k <= 0`, `α` above.
pub fn mu_k(kernel: &RadialKernel, k: i32, tp: &TheoremParams, grid: &Grid) -> Result<f64> {
    scalar_k(kernel, ScalarFamily::Mu, k, tp, grid)
}

/// `μ*_k`: exponent `γ₁ - 1` on octaves `k <= 0`, `γ₂ - 1` above.
pub fn mu_star_k(kernel: &RadialKernel, k: i32, tp: &TheoremParams, grid: &Grid) -> Result<f64> {
    scalar_k(kernel, ScalarFamily::MuStar, k, tp, grid)
}

pub fn c1(kernel: &RadialKernel, tp: &TheoremParams, grid: &Grid) -> Result<f64> {
    Ok(scalar_family(kernel, ScalarFamily::Lambda, tp, None, grid)?.value)
}

pub fn c2(kernel: &RadialKernel, tp: &TheoremParams, sigma: f64, grid: &Grid) -> Result<f64> {
    Ok(scalar_family(kernel, ScalarFamily::Lambda, tp, Some(sigma), grid)?.value)
}

pub fn c3_c4(kernel: &RadialKernel, tp: &TheoremParams, sigma: f64, grid: &Grid) -> Result<(f64, f64)> {
    Ok((
        scalar_family(kernel, ScalarFamily::Mu, tp, None, grid)?.value,
        scalar_family(kernel, ScalarFamily::Mu, tp, Some(sigma), grid)?.value,
    ))
}

pub fn c5_c6(kernel: &RadialKernel, tp: &TheoremParams, sigma: f64, grid: &Grid) -> Result<(f64, f64)> {
    Ok((
        scalar_family(kernel, ScalarFamily::MuStar, tp, None, grid)?.value,
        scalar_family(kernel, ScalarFamily::MuStar, tp, Some(sigma), grid)?.value,
    ))
}

/// `∫_0^∞ |Φ(t)| dt`.
pub fn kernel_l1(kernel: &RadialKernel, grid: &Grid) -> Result<f64> {
    Ok(kernel
        .octave_sum("∫|Φ(t)| dt", &grid.radial, |t| kernel.eval(t).abs())?
        .value)
}

/// `∫_{R^n} |Φ(y)|/|y|^n dy = |S^{n-1}| ∫_0^∞ |Φ(t)|/t dt`.
pub fn kernel_dilation_mass(kernel: &RadialKernel, grid: &Grid) -> Result<f64> {
    let s = kernel.octave_sum("∫|Φ(y)|/|y|^n dy", &grid.radial, |t| kernel.eval(t).abs() / t)?;
    Ok(grid.sphere.measure() * s.value)
}

struct MatrixWeights {
    b1: f64,
    b2: f64,
    delta: f64,
    gammas: (f64, f64),
}

fn matrix_integrand(
    family: MatrixFamily,
    tp: &TheoremParams,
    w: &MatrixWeights,
    norm_a: f64,
    det_inv: f64,
    s: f64,
) -> f64 {
    let (n, q, alpha) = (tp.n(), tp.hp.q, tp.hp.alpha);
    match family {
        MatrixFamily::Theta => norm_a.powf(-w.b2 / q) * det_inv.powf(1.0 / q) * s.powf(alpha + w.b1 * alpha / n),
        MatrixFamily::Eta => {
            let e = if s <= 1.0 {
                alpha * (w.delta - 1.0) / w.delta
            } else {
                alpha
            };
            norm_a.powf(-w.b2 / q) * det_inv.powf(1.0 / q) * s.powf(e)
        }
        MatrixFamily::EtaStar => {
            let e = if s <= 1.0 { w.gammas.0 } else { w.gammas.1 };
            det_inv.powf(1.0 / q) * norm_a.powf(n / q) * s.powf(e)
        }
        MatrixFamily::Pullback => norm_a.powf(-w.b2 / q) * det_inv.powf(1.0 / q),
    }
}

fn matrix_weights(family: MatrixFamily, tp: &TheoremParams) -> Result<MatrixWeights> {
    let mut w = MatrixWeights {
        b1: 0.0,
        b2: 0.0,
        delta: 2.0,
        gammas: (0.0, 0.0),
    };
    match family {
        MatrixFamily::Theta => {
            w.b1 = tp.hp.w1.require_beta("theta_k")?;
            w.b2 = tp.hp.w2.require_beta("theta_k")?;
        }
        MatrixFamily::Eta => {
            w.b2 = tp.hp.w2.require_beta("eta_k")?;
            w.delta = tp.delta()?;
        }
        MatrixFamily::EtaStar => w.gammas = gammas(tp)?,
        MatrixFamily::Pullback => w.b2 = tp.hp.w2.require_beta("pullback factor")?,
    }
    Ok(w)
}

fn shell_sums(
    kernel: &RadialKernel,
    field: &MatrixField,
    family: MatrixFamily,
    tp: &TheoremParams,
    sigma: Option<f64>,
    grid: &Grid,
) -> Result<BTreeMap<i32, f64>> {
    let w = matrix_weights(family, tp)?;
    let single = field
        .octave_bounds
        .filter(|(m, big_m)| big_m - m == 1)
        .map(|(_, big_m)| big_m);
    let mut shells = BTreeMap::new();
    field.for_each_support_node(kernel, grid, |t, y, weight| {
        let a = field.matrix(y)?;
        let inv = a.inverse().ok_or_else(|| Error::SingularMatrix { y: y.to_vec() })?;
        let s = inv.norm();
        let k = single.unwrap_or_else(|| octave_of(s));
        let v = weight
            * kernel.eval(t).abs()
            * matrix_integrand(family, tp, &w, a.norm(), inv.det().abs(), s)
            * log_factor(s, sigma);
        if !v.is_finite() {
            return Err(Error::NonFinite {
                location: format!("y = {y:?}"),
                value: v,
            });
        }
        *shells.entry(k).or_insert(0.0) += v;
        Ok(())
    })?;
    Ok(shells)
}

/// Per-shell coefficients of `family` over `{2^{k-1} < ‖A⁻¹(y)‖ <= 2^k}`.
///
/// Shell membership is decided per node; the sums are recomputed on a grid
/// with twice the nodes and an unstable partition is an error.
pub fn matrix_family(
    kernel: &RadialKernel,
    field: &MatrixField,
    family: MatrixFamily,
    tp: &TheoremParams,
    sigma: Option<f64>,
    grid: &Grid,
) -> Result<OctaveSum> {
    if kernel.is_zero() {
        return Ok(OctaveSum::default());
    }
    let fine = Grid::new(&grid.settings().refined(2), grid.dim())?;
    let coarse = shell_sums(kernel, field, family, tp, sigma, grid)?;
    let refined = shell_sums(kernel, field, family, tp, sigma, &fine)?;
    let total: f64 = refined.values().sum();
    let mut change: f64 = 0.0;
    for k in coarse.keys().chain(refined.keys()) {
        let a = coarse.get(k).copied().unwrap_or(0.0);
        let b = refined.get(k).copied().unwrap_or(0.0);
        change = change.max((a - b).abs());
    }
    let change = if total > 0.0 { change / total } else { 0.0 };
    if change > SHELL_TOLERANCE {
        return Err(Error::UnstablePartition { change });
    }
    Ok(OctaveSum {
        value: total,
        error: (coarse.values().sum::<f64>() - total).abs(),
        terms: refined.into_iter().collect(),
        truncated: false,
    })
}

pub fn theta_k(kernel: &RadialKernel, field: &MatrixField, k: i32, tp: &TheoremParams, grid: &Grid) -> Result<f64> {
    let s = matrix_family(kernel, field, MatrixFamily::Theta, tp, None, grid)?;
    Ok(s.terms.iter().find(|(j, _)| *j == k).map_or(0.0, |(_, v)| *v))
}

pub fn c7_c8(
    kernel: &RadialKernel,
    field: &MatrixField,
    tp: &TheoremParams,
    sigma: f64,
    grid: &Grid,
) -> Result<(f64, f64)> {
    Ok((
        matrix_family(kernel, field, MatrixFamily::Theta, tp, None, grid)?.value,
        matrix_family(kernel, field, MatrixFamily::Theta, tp, Some(sigma), grid)?.value,
    ))
}

pub fn c9_c10(
    kernel: &RadialKernel,
    field: &MatrixField,
    tp: &TheoremParams,
    sigma: f64,
    grid: &Grid,
) -> Result<(f64, f64)> {
    Ok((
        matrix_family(kernel, field, MatrixFamily::Eta, tp, None, grid)?.value,
        matrix_family(kernel, field, MatrixFamily::Eta, tp, Some(sigma), grid)?.value,
    ))
}

pub fn c11_c12(
    kernel: &RadialKernel,
    field: &MatrixField,
    tp: &TheoremParams,
    sigma: f64,
    grid: &Grid,
) -> Result<(f64, f64)> {
    Ok((
        matrix_family(kernel, field, MatrixFamily::EtaStar, tp, None, grid)?.value,
        matrix_family(kernel, field, MatrixFamily::EtaStar, tp, Some(sigma), grid)?.value,
    ))
}

/// The constant named by [`Theorem::constant_name`], without the `‖Ω‖`
/// factor.
pub fn theorem_constant(
    which: Theorem,
    kernel: &RadialKernel,
    field: Option<&MatrixField>,
    tp: &TheoremParams,
    grid: &Grid,
) -> Result<f64> {
    let sigma = (tp.hp.p < 1.0).then(|| tp.sigma());
    let need_field = || field.ok_or_else(|| invalid(format!("{which} needs a matrix field")));
    Ok(match which {
        Theorem::HardyHardy => kernel_l1(kernel, grid)?,
        Theorem::MatrixHardyHardy => kernel_dilation_mass(kernel, grid)?,
        Theorem::RoughPower => scalar_family(kernel, ScalarFamily::Lambda, tp, sigma, grid)?.value,
        Theorem::RoughA1 => scalar_family(kernel, ScalarFamily::Mu, tp, sigma, grid)?.value,
        Theorem::RoughShift => scalar_family(kernel, ScalarFamily::MuStar, tp, sigma, grid)?.value,
        Theorem::MatrixPower => matrix_family(kernel, need_field()?, MatrixFamily::Theta, tp, sigma, grid)?.value,
        Theorem::MatrixA1 => matrix_family(kernel, need_field()?, MatrixFamily::Eta, tp, sigma, grid)?.value,
        Theorem::MatrixShift => matrix_family(kernel, need_field()?, MatrixFamily::EtaStar, tp, sigma, grid)?.value,
    })
}

/// Everything `constants` reports for one kernel.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstantsReport {
    pub lambda_k: BTreeMap<i32, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub mu_k: BTreeMap<i32, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub mu_star_k: BTreeMap<i32, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub theta_k: BTreeMap<i32, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gammas: Option<(f64, f64)>,
    pub sigma: f64,
    /// Constants that could be evaluated.
    #[serde(flatten)]
    pub values: BTreeMap<String, f64>,
    /// Why the remaining constants are absent.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub unavailable: BTreeMap<String, String>,
}

/// Evaluates every constant the inputs allow; failures are recorded by name.
pub fn all_constants(
    kernel: &RadialKernel,
    field: Option<&MatrixField>,
    tp: &TheoremParams,
    grid: &Grid,
) -> ConstantsReport {
    let sigma = tp.sigma();
    let mut r = ConstantsReport {
        sigma,
        ..Default::default()
    };
    let record = |r: &mut ConstantsReport, names: [&str; 2], out: Result<(OctaveSum, OctaveSum)>| match out {
        Ok((plain, logged)) => {
            r.values.insert(names[0].into(), plain.value);
            r.values.insert(names[1].into(), logged.value);
        }
        Err(e) => {
            for name in names {
                r.unavailable.insert(name.into(), e.to_string());
            }
        }
    };
    for (family, names) in [
        (ScalarFamily::Lambda, ["C1", "C2"]),
        (ScalarFamily::Mu, ["C3", "C4"]),
        (ScalarFamily::MuStar, ["C5", "C6"]),
    ] {
        let out = scalar_family(kernel, family, tp, None, grid)
            .and_then(|a| Ok((a, scalar_family(kernel, family, tp, Some(sigma), grid)?)));
        if let Ok((plain, _)) = &out {
            let terms = plain.terms.iter().copied().filter(|(_, v)| *v != 0.0).collect();
            match family {
                ScalarFamily::Lambda => r.lambda_k = terms,
                ScalarFamily::Mu => r.mu_k = terms,
                ScalarFamily::MuStar => r.mu_star_k = terms,
                ScalarFamily::Pullback => {}
            }
        }
        record(&mut r, names, out);
    }
    r.gammas = gammas(tp).ok();
    match kernel_l1(kernel, grid) {
        Ok(v) => {
            r.values.insert("int_phi".into(), v);
        }
        Err(e) => {
            r.unavailable.insert("int_phi".into(), e.to_string());
        }
    }
    match kernel_dilation_mass(kernel, grid) {
        Ok(v) => {
            r.values.insert("int_phi_over_y_n".into(), v);
        }
        Err(e) => {
            r.unavailable.insert("int_phi_over_y_n".into(), e.to_string());
        }
    }
    if let Some(field) = field {
        for (family, names) in [
            (MatrixFamily::Theta, ["C7", "C8"]),
            (MatrixFamily::Eta, ["C9", "C10"]),
            (MatrixFamily::EtaStar, ["C11", "C12"]),
        ] {
            let out = matrix_family(kernel, field, family, tp, None, grid)
                .and_then(|a| Ok((a, matrix_family(kernel, field, family, tp, Some(sigma), grid)?)));
            if let (MatrixFamily::Theta, Ok((plain, _))) = (family, &out) {
                r.theta_k = plain.terms.iter().copied().collect();
            }
            record(&mut r, names, out);
        }
    }
    r
}

/// One hypothesis of a gate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateItem {
    pub name: String,
    pub passed: bool,
    /// Signed slack of the hypothesis, when it is a measurable inequality.
    pub margin: Option<f64>,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateReport {
    pub theorem: Theorem,
    pub passed: bool,
    pub items: Vec<GateItem>,
}

impl GateReport {
    pub fn item(&self, name: &str) -> Option<&GateItem> {
        self.items.iter().find(|i| i.name == name)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.items
            .iter()
            .filter(|i| !i.passed)
            .map(|i| i.name.as_str())
            .collect()
    }
}

/// Objects a gate may need besides the parameters.
#[derive(Clone, Copy, Debug, Default)]
pub struct GateInputs<'a> {
    pub kernel: Option<&'a RadialKernel>,
    pub omega: Option<&'a SphereSymbol>,
    pub field: Option<&'a MatrixField>,
}

struct Items(Vec<GateItem>);

impl Items {
    fn push(&mut self, name: &str, passed: bool, margin: Option<f64>, detail: impl Into<String>) {
        self.0.push(GateItem {
            name: name.into(),
            passed,
            margin: margin.filter(|m| m.is_finite()),
            detail: detail.into(),
        });
    }

    fn slack(&mut self, name: &str, margin: f64, strict: bool, detail: impl Into<String>) {
        let passed = if strict { margin > 0.0 } else { margin >= 0.0 };
        self.push(name, passed, Some(margin), detail);
    }

    fn result<T>(&mut self, name: &str, r: Result<T>, detail: impl Fn(&T) -> String) -> Option<T> {
        match r {
            Ok(v) => {
                self.push(name, true, None, detail(&v));
                Some(v)
            }
            Err(e) => {
                self.push(name, false, None, e.to_string());
                None
            }
        }
    }
}

fn power_nonpositive(items: &mut Items, name: &str, w: &Weight, n: usize) {
    match w.beta() {
        Some(b) => {
            let margin = (b + n as f64).min(-b);
            items.push(
                name,
                b > -(n as f64) && b <= 0.0,
                Some(margin),
                format!("beta = {b}, need beta in (-{n}, 0]"),
            );
        }
        None => items.push(name, false, None, "needs a power weight"),
    }
}

/// Critical reverse-Hölder index of an `A₁` power weight.
fn rh_index(w: &Weight, n: usize) -> Result<f64> {
    reverse_holder_index_power(w.require_beta("reverse Hölder index")?, n)
}

fn delta_range(items: &mut Items, name: &str, delta: Option<f64>, w: &Weight, n: usize) {
    let Some(d) = delta else {
        items.push(name, false, None, "not given");
        return;
    };
    match rh_index(w, n) {
        Ok(r) => {
            let margin = (d - 1.0).min(r - d);
            items.push(name, d > 1.0 && d < r, Some(margin), format!("delta = {d}, r = {r}"));
        }
        Err(e) => items.push(name, false, None, e.to_string()),
    }
}

/// `sup_k ω₂(B_k)/ω₁(B_k)`, by exponent comparison for power weights and by
/// sampling `k` over the grid range otherwise.
fn ball_ratio(items: &mut Items, tp: &TheoremParams, grid: &Grid) {
    let name = "ball_domination";
    let (w1, w2) = (&tp.hp.w1, &tp.hp.w2);
    if let (Some(b1), Some(b2)) = (w1.beta(), w2.beta()) {
        // ω₂(B_k)/ω₁(B_k) = c 2^{k(β₂-β₁)} is bounded over all k iff β₁ = β₂
        let gap = (b2 - b1).abs();
        items.push(
            name,
            gap <= 1e-12,
            Some(-gap),
            format!("power weights: ratio grows like 2^(|k| {gap})"),
        );
        return;
    }
    let s = grid.settings();
    let worst = (s.k_min..=s.k_max)
        .map(|k| w2.dyadic_ball(k) / w1.dyadic_ball(k))
        .fold(0.0f64, f64::max);
    items.slack(
        name,
        tp.ratio_cap - worst,
        false,
        format!(
            "max ratio {worst:.6e} over k in [{}, {}], cap {}",
            s.k_min, s.k_max, tp.ratio_cap
        ),
    );
}

fn field_checks(items: &mut Items, tp: &TheoremParams, inputs: &GateInputs, grid: &Grid, hardy: bool) {
    let (Some(kernel), Some(field)) = (inputs.kernel, inputs.field) else {
        items.push("field", false, None, "kernel and matrix field are required");
        return;
    };
    if field.dim() != tp.hp.dim {
        items.push("field", false, None, "field dimension differs from the space dimension");
        return;
    }
    let Some(range) = items.result(
        "invertible",
        field.sampled_inverse_norm_range(kernel, grid),
        |(lo, hi)| format!("||A^-1|| in [{lo:.6e}, {hi:.6e}] at the nodes"),
    ) else {
        return;
    };
    if !hardy {
        return;
    }
    let rho = tp.rho_a.or(field.rho_a);
    match rho {
        Some(rho) => {
            items.slack("rho_at_least_one", rho - 1.0, false, format!("rho_A = {rho}"));
            if let Ok(sampled) = field.sampled_rho(kernel, grid) {
                // relative slack absorbs rounding in equality cases such as rotations
                let margin = rho - sampled;
                items.push(
                    "condition_number",
                    margin >= -1e-12 * rho,
                    Some(margin),
                    format!("max ||A^-1|| ||A|| = {sampled:.12} against rho_A = {rho}"),
                );
            }
        }
        None => items.push("rho_at_least_one", false, None, "rho_A not declared"),
    }
    let declared = tp.octave_bounds.or(field.octave_bounds);
    let (lo, hi) = range;
    match declared {
        Some((m, big_m)) => {
            let ok = lo > 2f64.powi(m) && hi <= 2f64.powi(big_m) * (1.0 + 1e-12);
            items.push(
                "inverse_norm_octaves",
                ok,
                Some((lo / 2f64.powi(m)).log2().min((2f64.powi(big_m) / hi).log2())),
                format!("declared (m, M) = ({m}, {big_m})"),
            );
        }
        None => items.push(
            "inverse_norm_octaves",
            true,
            None,
            format!("derived (m, M) = ({}, {})", octave_of(lo) - 1, octave_of(hi)),
        ),
    }
    items.result("kernel_dilation_mass", kernel_dilation_mass(kernel, grid), |v| {
        format!("{v:.6e}")
    });
}

/// Itemized check of the hypotheses of `which`. Failures are data.
pub fn gate_thm(tp: &TheoremParams, which: Theorem, inputs: &GateInputs, grid: &Grid) -> GateReport {
    let hp = &tp.hp;
    let n = hp.dim;
    let nf = n as f64;
    let mut items = Items(Vec::new());
    items.slack("q_above_one", hp.q - 1.0, true, format!("q = {}", hp.q));
    items.push(
        "p_range",
        hp.p > 0.0 && hp.p <= 1.0,
        Some(hp.p.min(1.0 - hp.p)),
        format!("p = {}", hp.p),
    );
    items.slack(
        "alpha_floor",
        hp.alpha - hp.alpha_floor() + 1e-12,
        false,
        format!("alpha = {}, n(1 - 1/q) = {}", hp.alpha, hp.alpha_floor()),
    );
    if hp.p < 1.0 && !which.is_hardy_target() {
        let sigma = tp.sigma();
        let need = (1.0 - hp.p) / hp.p;
        items.slack("sigma", sigma - need, true, format!("sigma = {sigma}, need > {need}"));
    }

    match which {
        Theorem::HardyHardy | Theorem::MatrixHardyHardy | Theorem::RoughPower | Theorem::MatrixPower => {
            power_nonpositive(&mut items, "w1_power", &hp.w1, n);
            power_nonpositive(&mut items, "w2_power", &hp.w2, n);
        }
        Theorem::RoughA1 | Theorem::MatrixA1 => {
            power_nonpositive(&mut items, "w2_power", &hp.w2, n);
            power_nonpositive(&mut items, "w1_a1", &hp.w1, n);
            delta_range(&mut items, "delta", tp.delta, &hp.w1, n);
        }
        Theorem::RoughShift | Theorem::MatrixShift => {
            power_nonpositive(&mut items, "w1_a1", &hp.w1, n);
            power_nonpositive(&mut items, "w2_a1", &hp.w2, n);
            delta_range(&mut items, "delta1", tp.delta1, &hp.w1, n);
            delta_range(&mut items, "delta2", tp.delta2, &hp.w2, n);
            match (tp.q_star, tp.alpha_star) {
                (Some(qs), Some(a_star)) => {
                    items.push(
                        "q_star_range",
                        qs >= 1.0 && qs < hp.q,
                        Some((qs - 1.0).min(hp.q - qs)),
                        format!("q* = {qs}, q = {}", hp.q),
                    );
                    items.slack("alpha_star_positive", a_star, true, format!("alpha* = {a_star}"));
                    match rh_index(&hp.w2, n) {
                        Ok(r) => {
                            let r_conj = if r.is_infinite() { 1.0 } else { r / (r - 1.0) };
                            items.slack(
                                "q_above_q_star_rh",
                                hp.q - qs * r_conj,
                                true,
                                format!("q* r' = {}", qs * r_conj),
                            );
                        }
                        Err(e) => items.push("q_above_q_star_rh", false, None, e.to_string()),
                    }
                    let gap = (1.0 / hp.q + hp.alpha / nf) - (1.0 / qs + a_star / nf);
                    items.push(
                        "index_balance",
                        gap.abs() <= 1e-12,
                        Some(-gap.abs()),
                        format!("1/q + alpha/n - 1/q* - alpha*/n = {gap:e}"),
                    );
                }
                _ => items.push("q_star_range", false, None, "q_star and alpha_star are required"),
            }
            ball_ratio(&mut items, tp, grid);
        }
    }

    if which == Theorem::HardyHardy {
        let upper = 1.0 + hp.alpha_floor();
        items.slack(
            "alpha_below_ceiling",
            upper - hp.alpha,
            true,
            format!("need alpha < {upper}"),
        );
        match inputs.kernel.map(|k| k.compact_bounds()) {
            Some(Some((m, big_m))) => items.push("compact_kernel", true, None, format!("supp in (2^{m}, 2^{big_m}]")),
            Some(None) => items.push("compact_kernel", false, None, "kernel support is unbounded"),
            None => items.push("compact_kernel", false, None, "kernel is required"),
        }
    }

    if !which.is_matrix() && which != Theorem::HardyHardy {
        if let Some(omega) = inputs.omega {
            let qc = hp.q / (hp.q - 1.0);
            let v = omega.lr_norm(qc, &grid.sphere);
            items.push(
                "omega_integrable",
                v.is_finite(),
                None,
                format!("||Omega||_q' = {v:.6e}"),
            );
        }
    }

    if which.is_matrix() {
        field_checks(&mut items, tp, inputs, grid, which == Theorem::MatrixHardyHardy);
    }

    if !which.is_hardy_target() {
        if let Some(kernel) = inputs.kernel {
            let name = which.constant_name(hp.p);
            let ok = !which.is_matrix() || inputs.field.is_some();
            if ok {
                items.result(
                    "constant_finite",
                    theorem_constant(which, kernel, inputs.field, tp, grid),
                    |v| format!("{name} = {v:.6e}"),
                );
            }
        }
    }

    let passed = items.0.iter().all(|i| i.passed);
    GateReport {
        theorem: which,
        passed,
        items: items.0,
    }
}

/// Gates for several theorems at once, keyed by theorem.
pub fn gate_all(tp: &TheoremParams, inputs: &GateInputs, grid: &Grid) -> HashMap<Theorem, GateReport> {
    Theorem::ALL
        .into_iter()
        .map(|t| (t, gate_thm(tp, t, inputs, grid)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hausdorff::{KernelSpec, PowerPiece, SmallMatrix};
    use crate::quadrature::GridSettings;
    use approx::assert_relative_eq;
    use std::f64::consts::LN_2;

    fn grid(n: usize) -> Grid {
        Grid::new(&GridSettings::default(), n).unwrap()
    }

    fn tp(alpha: f64, p: f64, q: f64, n: usize, b1: f64, b2: f64) -> TheoremParams {
        TheoremParams::new(
            HerzParams::new(
                alpha,
                p,
                q,
                n,
                Weight::power(b1, n).unwrap(),
                Weight::power(b2, n).unwrap(),
            )
            .unwrap(),
        )
    }

    fn piece(k: i32, e: f64) -> RadialKernel {
        RadialKernel::from_spec(KernelSpec::PiecewisePower {
            pieces: vec![PowerPiece {
                octave: k,
                coefficient: 1.0,
                exponent: e,
            }],
        })
        .unwrap()
    }

    #[test]
    fn lambda_examples() {
        let g = grid(1);
        let t = tp(0.5, 1.0, 2.0, 1, 0.0, 0.0);
        let phi = RadialKernel::octave_indicator(1);
        assert_relative_eq!(lambda_k(&phi, 1, &t, &g).unwrap(), 1.0, max_relative = 1e-14);
        assert_eq!(lambda_k(&phi, 2, &t, &g).unwrap(), 0.0);
        assert_eq!(lambda_k(&RadialKernel::zero(), 1, &t, &g).unwrap(), 0.0);
        // Φ(t) = t^{1-(n+β₂)/q-α-β₁α/n} χ_(1,2] makes the integrand 1
        let t2 = tp(1.5, 1.0, 3.0, 2, -0.5, -1.0);
        let e = 1.0 - (2.0 - 1.0) / 3.0 - 1.5 - (-0.5 * 1.5 / 2.0);
        let phi = piece(1, e);
        assert_relative_eq!(lambda_k(&phi, 1, &t2, &g).unwrap(), 1.0, max_relative = 1e-13);
        assert_relative_eq!(c1(&phi, &t2, &g).unwrap(), 1.0, max_relative = 1e-13);
    }

    #[test]
    fn c2_with_unit_sigma() {
        let g = grid(1);
        let t = tp(0.5, 0.5, 2.0, 1, 0.0, 0.0);
        // ∫_1^2 (log₂ t + 1) dt = 3 - 1/ln 2
        let v = c2(&RadialKernel::octave_indicator(1), &t, 1.0, &g).unwrap();
        assert_relative_eq!(v, 3.0 - 1.0 / LN_2, max_relative = 1e-13);
    }

    #[test]
    fn c3_branches() {
        let g = grid(1);
        let mut t = tp(0.5, 1.0, 2.0, 1, 0.0, 0.0);
        t.delta = Some(2.0);
        // ∫_{1/2}^1 t^{-1/4} dt
        let (c3, _) = c3_c4(&RadialKernel::octave_indicator(0), &t, 1.0, &g).unwrap();
        assert_relative_eq!(c3, (4.0 / 3.0) * (1.0 - 2f64.powf(-0.75)), max_relative = 1e-13);
        // only the α-branch on (1, 2]: ∫_1^2 t^0 dt
        let (c3, _) = c3_c4(&RadialKernel::octave_indicator(1), &t, 1.0, &g).unwrap();
        assert_relative_eq!(c3, 1.0, max_relative = 1e-13);
    }

    #[test]
    fn gamma_examples() {
        let mut t = tp(0.5, 1.0, 2.0, 1, 0.0, 0.0);
        t.alpha_star = Some(0.5);
        t.delta1 = Some(2.0);
        t.delta2 = Some(2.0);
        let (g1, g2) = gammas(&t).unwrap();
        assert!((g1 - 0.25).abs() < 1e-15 && (g2 - 1.25).abs() < 1e-15);
        t.alpha_star = Some(0.0);
        assert_eq!(gammas(&t).unwrap().1, 1.0);
        t.alpha_star = Some(0.5);
        t.delta2 = Some(1e12);
        assert!((gammas(&t).unwrap().1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_field_reduces_to_scalar() {
        let g = grid(2);
        let mut t = tp(1.0, 1.0, 2.0, 2, -0.5, -0.5);
        t.delta = Some(2.0);
        let phi = RadialKernel::octave_indicator(1);
        let c = 3.0;
        let field = MatrixField::constant(SmallMatrix::scalar(2, c));
        let s = 2f64.sqrt() / c;
        let mass = kernel_dilation_mass(&phi, &g).unwrap();
        let expect = (c * 2f64.sqrt()).powf(0.25) * (1.0 / (c * c)).powf(0.5) * s.powf(1.0 - 0.25) * mass;
        let s7 = matrix_family(&phi, &field, MatrixFamily::Theta, &t, None, &g).unwrap();
        assert_relative_eq!(s7.value, expect, max_relative = 1e-12);
        assert_eq!(s7.terms.len(), 1);
        assert_eq!(s7.terms[0].0, octave_of(s));
        assert_relative_eq!(mass, 2.0 * std::f64::consts::PI * LN_2, max_relative = 1e-14);
    }

    #[test]
    fn gates() {
        let g = grid(1);
        let mut t = tp(0.5, 1.0, 2.0, 1, 0.0, 0.0);
        t.q_star = Some(1.0);
        t.alpha_star = Some(0.0);
        let r = gate_thm(&t, Theorem::RoughShift, &GateInputs::default(), &g);
        assert!(r.item("index_balance").unwrap().passed);
        let mut t = tp(0.5, 1.0, 2.0, 1, -0.2, -0.5);
        t.q_star = Some(1.0);
        t.alpha_star = Some(0.0);
        let r = gate_thm(&t, Theorem::RoughShift, &GateInputs::default(), &g);
        assert!(!r.item("ball_domination").unwrap().passed);

        let g2 = grid(2);
        let phi = RadialKernel::octave_indicator(1);
        let rot = MatrixField::from_fn_radial(2, |t| SmallMatrix::rotation(1.0, t));
        let t2 = tp(1.0, 1.0, 2.0, 2, 0.0, 0.0);
        let inputs = GateInputs {
            kernel: Some(&phi),
            omega: None,
            field: Some(&rot),
        };
        let mut tr = t2.clone();
        tr.rho_a = Some(1.0);
        let r = gate_thm(&tr, Theorem::MatrixHardyHardy, &inputs, &g2);
        assert!(!r.item("condition_number").unwrap().passed);
        tr.rho_a = Some(2.0);
        let r = gate_thm(&tr, Theorem::MatrixHardyHardy, &inputs, &g2);
        let item = r.item("condition_number").unwrap();
        assert!(item.passed && item.margin.unwrap().abs() < 1e-12);
        assert!(r.passed, "{:?}", r.failures());
    }

    #[test]
    fn theorem_names_round_trip() {
        for t in Theorem::ALL {
            assert_eq!(t.name().parse::<Theorem>().unwrap(), t);
            let json = serde_json::to_string(&t).unwrap();
            assert_eq!(json, format!("\"{}\"", t.name()));
        }
    }
}
