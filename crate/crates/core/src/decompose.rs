//! Splitting the image of an atom into per-octave pieces, each normalised
//! to be an atom (Hardy targets) or a dyadic unit (Herz targets).
//!
//! The piece for octave `k` restricts the operator to `|y|` in the `k`-th
//! octave (rough) or to the shell `2^{k-1} < ‖A⁻¹(y)‖ <= 2^k` (matrix). In
//! absolute mode every factor enters with its absolute value, which bounds
//! the signed image pointwise.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atoms::{atom_grid, validate_atom, Atom, CentralRequirements, Tolerances, ValidationReport};
use crate::bounds::{matrix_family, scalar_family, MatrixFamily, ScalarFamily, Theorem, TheoremParams};
use crate::error::{invalid, Error, Result};
use crate::function::{norm, SampledFunction};
use crate::hausdorff::{
    apply_matrix_restricted, apply_rough_restricted, MatrixField, RadialKernel, Restriction, SmallMatrix, SphereSymbol,
};
use crate::herz::{lp_sum, weighted_lq_norm, HerzParams, Region};
use crate::quadrature::{octave_bounds, octave_of, Grid};

/// Pieces whose coefficient is below this fraction of the largest are dropped.
pub const PIECE_DROP: f64 = 1e-14;

static NEXT_PROVENANCE: AtomicU64 = AtomicU64::new(1);

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Pieces of `H a` itself; they keep the moments of `a`.
    Signed,
    /// Pieces of the operator with `|Φ|`, `|Ω|` and `|a|`.
    #[default]
    Absolute,
}

#[derive(Clone, Copy, Debug)]
pub struct DecomposeOptions<'a> {
    pub theorem: Theorem,
    pub mode: Mode,
    pub tp: &'a TheoremParams,
    /// Grid for the inner operator integrals.
    pub grid: &'a Grid,
    pub tols: &'a Tolerances,
}

#[derive(Clone, Debug)]
pub struct DecompositionPiece {
    pub provenance: u64,
    pub k: i32,
    pub coefficient: f64,
    /// Family value (`λ_k`, `μ_k`, `μ*_k`, `θ_k`, `η_k` or `η*_k`).
    pub raw_coefficient: f64,
    /// `b_k / coefficient`.
    pub piece: SampledFunction,
    pub requirements: CentralRequirements,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PieceSummary {
    pub k: i32,
    pub coefficient: f64,
    pub raw_coefficient: f64,
    pub support_k: i32,
    pub inner_radius: Option<f64>,
    pub moments: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct Decomposition {
    pub provenance: u64,
    pub theorem: Theorem,
    pub mode: Mode,
    pub j_a: i32,
    /// Space the pieces are certified in.
    pub hp: HerzParams,
    pub pieces: Vec<DecompositionPiece>,
    /// `(k, coefficient)` of pieces under [`PIECE_DROP`].
    pub dropped: Vec<(i32, f64)>,
    /// The family sum was cut by the drop threshold.
    pub truncated: bool,
    /// The whole image in the same mode, evaluated directly.
    pub direct: SampledFunction,
}

impl Decomposition {
    pub fn reconstruct(&self, x: &[f64]) -> Result<f64> {
        reconstruct(&self.pieces, x)
    }

    /// `|reconstruct(x) - direct(x)|`.
    pub fn reconstruction_residual(&self, x: &[f64]) -> Result<f64> {
        Ok((self.reconstruct(x)? - self.direct.eval(x)).abs())
    }

    /// `∑ coefficient · piece` as one function.
    pub fn assembled(&self) -> Result<SampledFunction> {
        if self.pieces.is_empty() {
            return Ok(SampledFunction::zero(self.hp.dim));
        }
        let terms: Vec<(f64, SampledFunction)> = self.pieces.iter().map(|p| (p.coefficient, p.piece.clone())).collect();
        SampledFunction::linear_combination(&terms)
    }

    pub fn coefficients(&self) -> Vec<f64> {
        self.pieces.iter().map(|p| p.coefficient).collect()
    }

    /// Validates every piece, in parallel.
    pub fn certify(&self, tols: &Tolerances) -> Result<Vec<ValidationReport>> {
        self.pieces
            .par_iter()
            .map(|p| certify_piece(p, &self.hp, tols))
            .collect()
    }

    /// `(∑ |c_k|^p)^{1/p}`, once every piece has been certified.
    pub fn certified_atomic_norm(&self, tols: &Tolerances) -> Result<f64> {
        for report in self.certify(tols)? {
            report.into_result()?;
        }
        Ok(lp_sum(self.coefficients(), self.hp.p))
    }

    pub fn summary(&self) -> Vec<PieceSummary> {
        self.pieces
            .iter()
            .map(|p| PieceSummary {
                k: p.k,
                coefficient: p.coefficient,
                raw_coefficient: p.raw_coefficient,
                support_k: p.requirements.support_k,
                inner_radius: p.requirements.inner_radius,
                moments: p.requirements.moments,
            })
            .collect()
    }
}

/// `∑ c_k b_k(x)` over pieces of one decomposition.
pub fn reconstruct(pieces: &[DecompositionPiece], x: &[f64]) -> Result<f64> {
    let Some(first) = pieces.first() else {
        return Ok(0.0);
    };
    if pieces.iter().any(|p| p.provenance != first.provenance) {
        return Err(Error::ProvenanceMismatch);
    }
    let mut sum = 0.0;
    for p in pieces {
        let v = p.piece.eval(x);
        if !v.is_finite() {
            return Err(Error::NonFinite {
                location: format!("piece {} at x = {x:?}", p.k),
                value: v,
            });
        }
        sum += p.coefficient * v;
    }
    Ok(sum)
}

/// Checks a piece against its recorded requirements on the atom grid.
pub fn certify_piece(piece: &DecompositionPiece, hp: &HerzParams, tols: &Tolerances) -> Result<ValidationReport> {
    crate::atoms::validate_function(&piece.piece, &piece.requirements, hp, tols, &atom_grid(hp.dim)?)
}

/// Unnormalised piece with its declared octaves and break points.
struct RawPiece {
    k: i32,
    raw: f64,
    function: SampledFunction,
    requirements: CentralRequirements,
}

/// How a piece coefficient is obtained.
enum Normalization {
    /// Known coefficient for octave `k`.
    Explicit(BTreeMap<i32, f64>),
    /// `‖b_k‖_{L^{q*}(ω₂)} ω₁(B_{j_a+k})^{α*/n}`.
    Measured,
}

fn check_common(atom: &Atom, opts: &DecomposeOptions) -> Result<()> {
    let n = opts.tp.hp.dim;
    if atom.profile.dim() != n || opts.grid.dim() != n {
        return Err(invalid("atom, parameters and grid dimensions differ"));
    }
    validate_atom(atom, &opts.tp.hp, opts.tols)?.into_result()
}

fn certification_space(opts: &DecomposeOptions) -> Result<HerzParams> {
    if opts.theorem.is_shift() {
        opts.tp.target()
    } else {
        Ok(opts.tp.hp.clone())
    }
}

/// Edges of the atom's radial structure: break points and octave edges.
fn atom_edges(atom: &Atom) -> Vec<f64> {
    let mut out = atom.profile.breakpoints().to_vec();
    for j in atom.r_a..=atom.j_a {
        out.push(octave_bounds(j).1);
    }
    out
}

fn finish(
    raw: Vec<RawPiece>,
    normalization: Normalization,
    opts: &DecomposeOptions,
    atom: &Atom,
    truncated: bool,
    direct: SampledFunction,
) -> Result<Decomposition> {
    let hp = certification_space(opts)?;
    let n = hp.dim as f64;
    let vgrid = atom_grid(hp.dim)?;
    let coefficients: Vec<f64> = match &normalization {
        Normalization::Explicit(c) => raw.iter().map(|r| c.get(&r.k).copied().unwrap_or(0.0)).collect(),
        Normalization::Measured => raw
            .par_iter()
            .map(|r| {
                let m = weighted_lq_norm(&r.function, hp.q, &hp.w2, Region::Whole, &vgrid)?;
                Ok(m.value * hp.w1.dyadic_ball(atom.j_a + r.k).powf(hp.alpha / n))
            })
            .collect::<Result<_>>()?,
    };
    let largest = coefficients.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let provenance = NEXT_PROVENANCE.fetch_add(1, Ordering::Relaxed);
    let mut pieces = Vec::new();
    let mut dropped = Vec::new();
    for (r, c) in raw.into_iter().zip(coefficients) {
        if !c.is_finite() {
            return Err(Error::NonFinite {
                location: format!("coefficient of piece {}", r.k),
                value: c,
            });
        }
        if c == 0.0 || c.abs() < PIECE_DROP * largest {
            dropped.push((r.k, c));
            continue;
        }
        pieces.push(DecompositionPiece {
            provenance,
            k: r.k,
            coefficient: c,
            raw_coefficient: r.raw,
            piece: r.function.scaled(1.0 / c),
            requirements: r.requirements,
        });
    }
    Ok(Decomposition {
        provenance,
        theorem: opts.theorem,
        mode: opts.mode,
        j_a: atom.j_a,
        hp,
        pieces,
        dropped,
        truncated,
        direct,
    })
}

fn nonzero_terms(terms: &[(i32, f64)]) -> Vec<(i32, f64)> {
    terms.iter().copied().filter(|(_, v)| *v != 0.0).collect()
}

/// Decomposes `H_{Φ,Ω} a` (or its absolute majorant) by octaves of `|y|`.
///
/// Signed mode needs a compact kernel and a constant symbol, and targets the
/// Hardy space; its pieces are certified with vanishing mean.
pub fn decompose_rough(
    kernel: &RadialKernel,
    omega: &SphereSymbol,
    atom: &Atom,
    opts: &DecomposeOptions,
) -> Result<Decomposition> {
    let theorem = opts.theorem;
    if theorem.is_matrix() {
        return Err(invalid(format!("{theorem} concerns the matrix operator")));
    }
    check_common(atom, opts)?;
    let (tp, grid) = (opts.tp, opts.grid);
    let hp = &tp.hp;
    let dim = hp.dim;
    let n = dim as f64;
    let signed = opts.mode == Mode::Signed;
    if signed {
        if theorem != Theorem::HardyHardy {
            return Err(invalid("signed pieces are certified only against the Hardy target"));
        }
        if omega.constant_value().is_none() {
            return Err(Error::Unsupported(
                "signed decomposition with a non-constant sphere symbol".into(),
            ));
        }
        if kernel.compact_bounds().is_none() {
            return Err(invalid("signed decomposition needs a compactly supported kernel"));
        }
    }
    let family = match theorem {
        Theorem::HardyHardy | Theorem::RoughPower => ScalarFamily::Lambda,
        Theorem::RoughA1 => ScalarFamily::Mu,
        _ => ScalarFamily::MuStar,
    };
    let raw_sum = scalar_family(kernel, family, tp, None, grid)?;
    let terms = nonzero_terms(&raw_sum.terms);

    let q = hp.q;
    let sphere_factor = grid.sphere.measure().powf(1.0 / q) * omega.lr_norm(q / (q - 1.0), &grid.sphere);
    let normalization = match theorem {
        Theorem::HardyHardy | Theorem::RoughPower => {
            let c = hp.alpha * (1.0 + hp.w1.require_beta("explicit piece coefficients")? / n);
            let scale = sphere_factor * 1f64.max(2f64.powf(c));
            Normalization::Explicit(terms.iter().map(|&(k, v)| (k, scale * v)).collect())
        }
        Theorem::RoughA1 => {
            let pull = scalar_family(kernel, ScalarFamily::Pullback, tp, None, grid)?;
            let base = hp.w1.dyadic_ball(atom.j_a);
            Normalization::Explicit(
                pull.terms
                    .iter()
                    .map(|&(k, v)| {
                        let ratio = (hp.w1.dyadic_ball(atom.j_a + k) / base).powf(hp.alpha / n);
                        (k, sphere_factor * ratio * v)
                    })
                    .collect(),
            )
        }
        _ => Normalization::Measured,
    };

    let restriction = |k: Option<i32>| Restriction {
        octave: k,
        absolute: !signed,
    };
    let shared = Arc::new((kernel.clone(), omega.clone(), atom.profile.clone(), grid.clone()));
    let evaluator = |k: Option<i32>| {
        let s = shared.clone();
        let r = restriction(k);
        move |rad: f64| {
            if rad == 0.0 {
                return 0.0;
            }
            let mut x = [0.0; 3];
            x[0] = rad;
            apply_rough_restricted(&s.0, &s.1, &s.2, &x[..s.3.dim()], &s.3, r).map_or(f64::NAN, |e| e.value)
        }
    };
    let edges = atom_edges(atom);
    let moments = signed.then_some(0);
    let mut raw = Vec::new();
    for &(k, v) in &terms {
        let inner = octave_bounds(atom.r_a + k - 1).1;
        let outer = octave_bounds(atom.j_a + k).1;
        let (lo, hi) = octave_bounds(k);
        let mut t_breaks: Vec<f64> = kernel
            .breakpoints()
            .iter()
            .copied()
            .filter(|t| *t > lo && *t < hi)
            .collect();
        t_breaks.extend([lo, hi]);
        let mut breaks: Vec<f64> = t_breaks.iter().flat_map(|t| edges.iter().map(move |b| b * t)).collect();
        breaks.extend([inner, outer]);
        let function = SampledFunction::radial(dim, Some(atom.r_a + k - 1), atom.j_a + k + 1, evaluator(Some(k)))?
            .with_breakpoints(breaks);
        raw.push(RawPiece {
            k,
            raw: v,
            function,
            requirements: CentralRequirements {
                support_k: atom.j_a + k,
                bound: certification_space(opts)?.size_bound(atom.j_a + k),
                moments,
                inner_radius: Some(inner),
            },
        });
    }
    let direct = match (terms.first(), terms.last()) {
        (Some(&(first, _)), Some(&(last, _))) => {
            SampledFunction::radial(dim, Some(atom.r_a + first - 1), atom.j_a + last + 1, evaluator(None))?
        }
        _ => SampledFunction::zero(dim),
    };
    finish(raw, normalization, opts, atom, raw_sum.truncated, direct)
}

/// `‖A‖^{-β₂/q} |det A⁻¹|^{1/q}` for `β₂ <= 0`, `‖A⁻¹‖^{β₂/q} |det A⁻¹|^{1/q}`
/// otherwise: the factor by which `f -> f∘A` can grow `L^q(|x|^{β₂})`.
fn pullback_factor(a: &SmallMatrix, inv: &SmallMatrix, beta2: f64, q: f64) -> f64 {
    let det = inv.det().abs().powf(1.0 / q);
    if beta2 <= 0.0 {
        a.norm().powf(-beta2 / q) * det
    } else {
        inv.norm().powf(beta2 / q) * det
    }
}

/// `∫_{shell k} |Φ(y)|/|y|^n g(A, A⁻¹) dy` for every shell met by the kernel.
fn shell_integrals(
    kernel: &RadialKernel,
    field: &MatrixField,
    grid: &Grid,
    g: impl Fn(&SmallMatrix, &SmallMatrix) -> f64,
) -> Result<BTreeMap<i32, f64>> {
    let mut out = BTreeMap::new();
    field.for_each_support_node(kernel, grid, |t, y, w| {
        let a = field.matrix(y)?;
        let inv = a.inverse().ok_or_else(|| Error::SingularMatrix { y: y.to_vec() })?;
        *out.entry(octave_of(inv.norm())).or_insert(0.0) += w * kernel.eval(t).abs() * g(&a, &inv);
        Ok(())
    })?;
    Ok(out)
}

/// Decomposes `H_{Φ,A} a` (or its absolute majorant) by shells of `‖A⁻¹(y)‖`.
///
/// Signed mode targets the Hardy space, keeps the moments of `a` and needs
/// declared shell bounds `(m, M)` and `ρ_A`, on the field or in the
/// parameters.
pub fn decompose_matrix(
    kernel: &RadialKernel,
    field: &MatrixField,
    atom: &Atom,
    opts: &DecomposeOptions,
) -> Result<Decomposition> {
    let theorem = opts.theorem;
    if !theorem.is_matrix() {
        return Err(invalid(format!("{theorem} concerns the rough operator")));
    }
    check_common(atom, opts)?;
    let (tp, grid) = (opts.tp, opts.grid);
    let hp = &tp.hp;
    let dim = hp.dim;
    let n = dim as f64;
    if field.dim() != dim {
        return Err(invalid("field and parameter dimensions differ"));
    }
    let signed = opts.mode == Mode::Signed;
    let declared_rho = field.rho_a.or(tp.rho_a);
    let declared_bounds = field.octave_bounds.or(tp.octave_bounds);
    if signed {
        if theorem != Theorem::MatrixHardyHardy {
            return Err(invalid("signed pieces are certified only against the Hardy target"));
        }
        if declared_bounds.is_none() || declared_rho.is_none() {
            return Err(invalid(
                "signed matrix decomposition needs declared octave bounds and rho_a",
            ));
        }
    }
    if kernel.is_zero() {
        let direct = SampledFunction::zero(dim);
        return finish(
            Vec::new(),
            Normalization::Explicit(BTreeMap::new()),
            opts,
            atom,
            false,
            direct,
        );
    }
    let family = match theorem {
        Theorem::MatrixHardyHardy | Theorem::MatrixPower => MatrixFamily::Theta,
        Theorem::MatrixA1 => MatrixFamily::Eta,
        _ => MatrixFamily::EtaStar,
    };
    let raw_sum = matrix_family(kernel, field, family, tp, None, grid)?;
    let mut terms = nonzero_terms(&raw_sum.terms);
    if let Some((m, big_m)) = declared_bounds {
        if let Some(&(k, _)) = terms.iter().find(|(k, _)| *k <= m || *k > big_m) {
            return Err(invalid(format!(
                "shell {k} lies outside the declared octave bounds ({m}, {big_m}]"
            )));
        }
    }
    terms.sort_by_key(|(k, _)| *k);
    let rho = match declared_rho {
        Some(r) => r,
        None => field.sampled_rho(kernel, grid)?,
    };

    let q = hp.q;
    let normalization = match theorem {
        Theorem::MatrixHardyHardy | Theorem::MatrixPower => {
            let b1 = hp.w1.require_beta("explicit piece coefficients")?;
            let b2 = hp.w2.require_beta("explicit piece coefficients")?;
            let c = hp.alpha * (1.0 + b1 / n);
            let scale = 1f64.max(2f64.powf(c));
            let shells = shell_integrals(kernel, field, grid, |a, inv| {
                pullback_factor(a, inv, b2, q) * inv.norm().powf(c)
            })?;
            Normalization::Explicit(shells.into_iter().map(|(k, v)| (k, scale * v)).collect())
        }
        Theorem::MatrixA1 => {
            let b2 = hp.w2.require_beta("explicit piece coefficients")?;
            let base = hp.w1.dyadic_ball(atom.j_a);
            let shells = shell_integrals(kernel, field, grid, |a, inv| pullback_factor(a, inv, b2, q))?;
            Normalization::Explicit(
                shells
                    .into_iter()
                    .map(|(k, v)| (k, (hp.w1.dyadic_ball(atom.j_a + k) / base).powf(hp.alpha / n) * v))
                    .collect(),
            )
        }
        _ => Normalization::Measured,
    };

    let radial = atom.profile.is_radial() && field.is_radial() && field.is_conformal();
    let shared = Arc::new((kernel.clone(), field.clone(), atom.profile.clone(), grid.clone()));
    let evaluator = |k: Option<i32>| {
        let s = shared.clone();
        let r = Restriction {
            octave: k,
            absolute: !signed,
        };
        move |x: &[f64]| {
            if norm(x) == 0.0 {
                return 0.0;
            }
            apply_matrix_restricted(&s.0, &s.1, &s.2, x, &s.3, r).map_or(f64::NAN, |e| e.value)
        }
    };
    // For conformal radial fields |A(t) x| = σ(t) |x| with σ = ‖A‖/√n, so the
    // kinks of a piece sit at (atom edge)/σ(t) for the t where the integrand
    // changes form.
    let (tl, th) = kernel.support();
    let mut t_breaks = kernel.breakpoints().to_vec();
    t_breaks.extend(field.shell_breaks(tl.unwrap_or(0.0), th.unwrap_or(f64::INFINITY)));
    t_breaks.extend(tl);
    t_breaks.extend(th);
    let edges = atom_edges(atom);
    let kink_radii: Vec<f64> = if field.is_radial() && field.is_conformal() {
        t_breaks
            .iter()
            .filter_map(|&t| field.matrix_at_radius(t).ok())
            .map(|a| a.norm() / n.sqrt())
            .flat_map(|sigma| edges.iter().map(move |b| b / sigma))
            .filter(|r| r.is_finite() && *r > 0.0)
            .collect()
    } else {
        Vec::new()
    };
    let moments = signed.then_some(atom.s);
    let build = |lo: i32, hi: i32, k: Option<i32>, breaks: Vec<f64>| -> Result<SampledFunction> {
        let f = SampledFunction::new(dim, Some(lo), hi, evaluator(k))?.with_breakpoints(breaks);
        Ok(f.assume_radial(radial))
    };
    let inner_of = |k: i32| octave_bounds(atom.r_a).1 * octave_bounds(k - 1).1 / rho;
    let mut raw = Vec::new();
    for &(k, v) in &terms {
        let inner = inner_of(k);
        let outer = octave_bounds(atom.j_a + k).1;
        let mut breaks = kink_radii.clone();
        breaks.extend([inner, outer]);
        let lo = octave_of(inner) - 1;
        raw.push(RawPiece {
            k,
            raw: v,
            function: build(lo, atom.j_a + k + 1, Some(k), breaks)?,
            requirements: CentralRequirements {
                support_k: atom.j_a + k,
                bound: certification_space(opts)?.size_bound(atom.j_a + k),
                moments,
                inner_radius: Some(inner),
            },
        });
    }
    let direct = match (terms.first(), terms.last()) {
        (Some(&(first, _)), Some(&(last, _))) => build(
            octave_of(inner_of(first)) - 1,
            atom.j_a + last + 1,
            None,
            kink_radii.clone(),
        )?,
        _ => SampledFunction::zero(dim),
    };
    finish(raw, normalization, opts, atom, raw_sum.truncated, direct)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atoms::{make_central_atom, Shape};
    use crate::hausdorff::{apply_matrix_hausdorff, apply_rough_hausdorff, KernelSpec, PowerPiece};
    use crate::quadrature::GridSettings;
    use crate::weights::Weight;

    fn grid(dim: usize) -> Grid {
        let s = GridSettings {
            nodes_per_octave: 16,
            sphere_res: 32,
            ..GridSettings::default()
        };
        Grid::new(&s, dim).unwrap()
    }

    fn params(dim: usize, beta: f64, q: f64, alpha: f64, p: f64) -> TheoremParams {
        let w = Weight::power(beta, dim).unwrap();
        TheoremParams::new(HerzParams::new(alpha, p, q, dim, w.clone(), w).unwrap())
    }

    fn two_octave_kernel() -> RadialKernel {
        RadialKernel::from_spec(KernelSpec::PiecewisePower {
            pieces: vec![
                PowerPiece {
                    octave: 1,
                    coefficient: 1.0,
                    exponent: 0.0,
                },
                PowerPiece {
                    octave: 2,
                    coefficient: 0.5,
                    exponent: 1.0,
                },
            ],
        })
        .unwrap()
    }

    fn opts<'a>(
        theorem: Theorem,
        mode: Mode,
        tp: &'a TheoremParams,
        g: &'a Grid,
        tols: &'a Tolerances,
    ) -> DecomposeOptions<'a> {
        DecomposeOptions {
            theorem,
            mode,
            tp,
            grid: g,
            tols,
        }
    }

    #[test]
    fn single_octave_kernel_gives_one_piece_equal_to_image() {
        let tp = params(1, 0.0, 2.0, 0.5, 1.0);
        let g = grid(1);
        let tols = Tolerances::default();
        let atom = make_central_atom(0, None, None, &tp.hp, Shape::RadialBump, 0).unwrap();
        let kernel = RadialKernel::octave_indicator(1);
        let omega = SphereSymbol::constant(1.0);
        let d = decompose_rough(
            &kernel,
            &omega,
            &atom,
            &opts(Theorem::HardyHardy, Mode::Signed, &tp, &g, &tols),
        )
        .unwrap();
        assert_eq!(d.pieces.len(), 1);
        for x in [0.3, 0.9, 1.4, 1.9] {
            let direct = apply_rough_hausdorff(&kernel, &omega, &atom.profile, &[x], &g)
                .unwrap()
                .value;
            assert!((d.reconstruct(&[x]).unwrap() - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn signed_pieces_certify_with_zero_mean() {
        let tp = params(2, 0.0, 2.0, 1.0, 1.0);
        let g = grid(2);
        let tols = Tolerances::default();
        let atom = make_central_atom(0, None, None, &tp.hp, Shape::RadialBump, 3).unwrap();
        let d = decompose_rough(
            &two_octave_kernel(),
            &SphereSymbol::constant(1.0),
            &atom,
            &opts(Theorem::HardyHardy, Mode::Signed, &tp, &g, &tols),
        )
        .unwrap();
        assert_eq!(d.pieces.iter().map(|p| p.k).collect::<Vec<_>>(), vec![1, 2]);
        for r in d.certify(&tols).unwrap() {
            assert!(r.passed, "{r:?}");
        }
    }

    #[test]
    fn reconstruction_matches_operator() {
        let tp = params(2, 0.0, 2.0, 1.0, 1.0);
        let g = grid(2);
        let tols = Tolerances::default();
        let atom = make_central_atom(1, None, None, &tp.hp, Shape::RadialBump, 1).unwrap();
        let kernel = two_octave_kernel();
        let omega = SphereSymbol::constant(1.0);
        let d = decompose_rough(
            &kernel,
            &omega,
            &atom,
            &opts(Theorem::HardyHardy, Mode::Signed, &tp, &g, &tols),
        )
        .unwrap();
        for r in [0.5, 1.5, 3.0, 6.0] {
            let x = [r, 0.0];
            let direct = apply_rough_hausdorff(&kernel, &omega, &atom.profile, &x, &g)
                .unwrap()
                .value;
            assert!((d.reconstruct(&x).unwrap() - direct).abs() <= 1e-12 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn zero_symbol_and_zero_kernel_give_no_pieces() {
        let tp = params(2, 0.0, 2.0, 1.0, 1.0);
        let g = grid(2);
        let tols = Tolerances::default();
        let atom = make_central_atom(0, None, None, &tp.hp, Shape::RadialBump, 0).unwrap();
        let o = opts(Theorem::RoughPower, Mode::Absolute, &tp, &g, &tols);
        let d = decompose_rough(&two_octave_kernel(), &SphereSymbol::constant(0.0), &atom, &o).unwrap();
        assert!(d.pieces.is_empty());
        let d = decompose_rough(&RadialKernel::zero(), &SphereSymbol::constant(1.0), &atom, &o).unwrap();
        assert!(d.pieces.is_empty());
        assert_eq!(d.reconstruct(&[1.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn constant_field_gives_one_shell() {
        let tp = params(2, 0.0, 2.0, 1.0, 1.0);
        let g = grid(2);
        let tols = Tolerances::default();
        let atom = make_central_atom(0, None, None, &tp.hp, Shape::RadialBump, 0).unwrap();
        let field = MatrixField::constant(SmallMatrix::scalar(2, 3.0));
        let kernel = two_octave_kernel();
        let d = decompose_matrix(
            &kernel,
            &field,
            &atom,
            &opts(Theorem::MatrixPower, Mode::Absolute, &tp, &g, &tols),
        )
        .unwrap();
        assert_eq!(d.pieces.len(), 1);
        // ‖A⁻¹‖ = √2/3 lies in octave -1
        assert_eq!(d.pieces[0].k, -1);
        let x = [0.2, 0.1];
        let direct = apply_matrix_hausdorff(&kernel, &field, &atom.profile, &x, &g)
            .unwrap()
            .value;
        assert!((d.reconstruct(&x).unwrap() - direct.abs()).abs() < 1e-12);
        for r in d.certify(&tols).unwrap() {
            assert!(r.passed, "{r:?}");
        }
    }

    #[test]
    fn mixed_provenance_is_rejected() {
        let tp = params(1, 0.0, 2.0, 0.5, 1.0);
        let g = grid(1);
        let tols = Tolerances::default();
        let atom = make_central_atom(0, None, None, &tp.hp, Shape::RadialBump, 0).unwrap();
        let o = opts(Theorem::HardyHardy, Mode::Signed, &tp, &g, &tols);
        let kernel = RadialKernel::octave_indicator(1);
        let omega = SphereSymbol::constant(1.0);
        let a = decompose_rough(&kernel, &omega, &atom, &o).unwrap();
        let b = decompose_rough(&kernel, &omega, &atom, &o).unwrap();
        let mixed = vec![a.pieces[0].clone(), b.pieces[0].clone()];
        assert!(matches!(reconstruct(&mixed, &[1.0]), Err(Error::ProvenanceMismatch)));
    }

    #[test]
    fn signed_mode_rejects_rough_symbol() {
        let tp = params(2, 0.0, 2.0, 1.0, 1.0);
        let g = grid(2);
        let tols = Tolerances::default();
        let atom = make_central_atom(0, None, None, &tp.hp, Shape::RadialBump, 0).unwrap();
        let omega = SphereSymbol::from_fn(|y| 1.0 + 0.5 * y[0]);
        let err = decompose_rough(
            &two_octave_kernel(),
            &omega,
            &atom,
            &opts(Theorem::HardyHardy, Mode::Signed, &tp, &g, &tols),
        );
        assert!(matches!(err, Err(Error::Unsupported(_))));
    }
}
