//! Randomised structural properties of the evaluators, norms and families.

use proptest::prelude::*;

use herzhaus_core::atoms::{make_central_atom, validate_atom, Shape, Tolerances};
use herzhaus_core::bounds::{lambda_k, TheoremParams};
use herzhaus_core::hausdorff::{
    apply_matrix_hausdorff, apply_rough_hausdorff, FieldKind, FieldSpec, KernelSpec, MatrixField, PowerPiece,
    RadialKernel, SphereSymbol, SymbolSpec,
};
use herzhaus_core::herz::herz_norm;
use herzhaus_core::weights::check_ap_power;
use herzhaus_core::{Grid, GridSettings, HerzParams, SampledFunction, Weight};

fn grid(dim: usize) -> Grid {
    Grid::new(&GridSettings::default(), dim).unwrap()
}

fn params(dim: usize, p: f64, beta: f64) -> HerzParams {
    HerzParams::new(
        dim as f64,
        p,
        2.0,
        dim,
        Weight::power(beta, dim).unwrap(),
        Weight::power(beta, dim).unwrap(),
    )
    .unwrap()
}

fn kernel(c1: f64, e1: f64, c2: f64) -> RadialKernel {
    RadialKernel::from_spec(KernelSpec::PiecewisePower {
        pieces: vec![
            PowerPiece {
                octave: 1,
                coefficient: c1,
                exponent: e1,
            },
            PowerPiece {
                octave: 2,
                coefficient: c2,
                exponent: 0.0,
            },
        ],
    })
    .unwrap()
}

fn shape(i: u8) -> Shape {
    [Shape::RadialBump, Shape::OscillatingRadial, Shape::TensorPolynomial][i as usize % 3]
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn herz_norm_is_absolutely_homogeneous(c in -50.0f64..50.0, j_a in -3i32..3, seed in 0u64..100) {
        let hp = params(2, 0.5, -0.5);
        let g = grid(2);
        let f = make_central_atom(j_a, None, None, &hp, Shape::OscillatingRadial, seed).unwrap().profile;
        let base = herz_norm(&f, &hp, None, &g).unwrap().value;
        let scaled = herz_norm(&f.scaled(c), &hp, None, &g).unwrap().value;
        prop_assert!(close(scaled, c.abs() * base, 1e-12));
    }

    #[test]
    fn rough_operator_is_linear(
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        e1 in -1.0f64..1.0,
        r in 0.1f64..8.0,
        angle in 0.0f64..std::f64::consts::TAU,
        s1 in 0u8..3,
        s2 in 0u8..3,
    ) {
        let hp = params(2, 1.0, 0.0);
        let g = grid(2);
        let k = kernel(1.0, e1, -0.4);
        let omega = SphereSymbol::from_spec(SymbolSpec::Linear { a0: 1.0, b: vec![0.2, 0.3] });
        let f = make_central_atom(0, None, None, &hp, shape(s1), 1).unwrap().profile;
        let h = make_central_atom(1, None, None, &hp, shape(s2), 2).unwrap().profile;
        let combo = SampledFunction::linear_combination(&[(a, f.clone()), (b, h.clone())]).unwrap();
        let x = [r * angle.cos(), r * angle.sin()];
        let eval = |u: &SampledFunction| apply_rough_hausdorff(&k, &omega, u, &x, &g).unwrap().value;
        let expected = a * eval(&f) + b * eval(&h);
        prop_assert!(close(eval(&combo), expected, 1e-10));
    }

    #[test]
    fn scalar_dilation_field_matches_constant_symbol(r in 0.1f64..8.0, e1 in -1.0f64..1.0, j_a in -2i32..2) {
        // A(y) = |y|^{-1} I turns the matrix operator into the rough one with Ω = 1
        let hp = params(2, 1.0, 0.0);
        let g = grid(2);
        let k = kernel(1.0, e1, 0.7);
        let field = MatrixField::from_spec(FieldSpec {
            kind: FieldKind::Dilation { dim: 2, c0: 1.0, exponent: -1.0 },
            rho_a: None,
            octave_bounds: None,
        })
        .unwrap();
        let f = make_central_atom(j_a, None, None, &hp, Shape::OscillatingRadial, 5).unwrap().profile;
        let x = [r, 0.0];
        let matrix = apply_matrix_hausdorff(&k, &field, &f, &x, &g).unwrap().value;
        let rough = apply_rough_hausdorff(&k, &SphereSymbol::constant(1.0), &f, &x, &g).unwrap().value;
        prop_assert!(close(matrix, rough, 1e-9), "matrix {matrix} rough {rough}");
    }

    #[test]
    fn lambda_is_homogeneous_in_the_kernel(c in 0.01f64..20.0, e1 in -1.0f64..1.0, k in 1i32..=2) {
        let tp = TheoremParams::new(params(1, 1.0, -0.5));
        let g = grid(1);
        let base = lambda_k(&kernel(1.0, e1, -0.4), k, &tp, &g).unwrap();
        let scaled = lambda_k(&kernel(c, e1, -0.4 * c), k, &tp, &g).unwrap();
        prop_assert!(close(scaled, c * base, 1e-12));
    }

    #[test]
    fn ap_classes_grow_with_p(beta in -3.0f64..4.0, p in 1.0f64..5.0, dp in 0.0f64..3.0, n in 1usize..=3) {
        if check_ap_power(beta, n, p).unwrap() {
            prop_assert!(check_ap_power(beta, n, p + dp).unwrap());
        }
    }

    #[test]
    fn generated_atoms_certify(j_a in -5i32..5, depth in 1i32..4, seed in 0u64..1000, extra in 0usize..2, sh in 0u8..3, n in 1usize..=2) {
        let hp = params(n, 1.0, -0.5);
        let atom = make_central_atom(j_a, Some(j_a - depth), Some(hp.default_moment_order() + extra), &hp, shape(sh), seed).unwrap();
        let report = validate_atom(&atom, &hp, &Tolerances::default()).unwrap();
        prop_assert!(report.passed, "{report:?}");
    }
}
