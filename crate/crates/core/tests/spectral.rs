use cocycle_clt::spectral::*;
use cocycle_clt::Complex64 as C;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

fn grid() -> Vec<RepresentationParams> {
    vec![
        RepresentationParams::principal(0.0),
        RepresentationParams::principal(1.0),
        RepresentationParams::principal(2.0),
        RepresentationParams::complementary(0.5),
        RepresentationParams::discrete(1, Side::Upper),
        RepresentationParams::discrete(2, Side::Upper),
        RepresentationParams::discrete(2, Side::Lower),
    ]
}

#[test]
fn principal_weights_are_one() {
    let w = basis_weights(&RepresentationParams::principal(2.0), 64).unwrap();
    assert!(w.iter().all(|&x| (x - 1.0).abs() < 1e-15));
}

#[test]
fn complementary_first_step() {
    let p = RepresentationParams::complementary(0.5);
    let w = basis_weights(&p, 8).unwrap();
    let idx = p.window(8);
    let at = |k: i64| w[idx.iter().position(|&j| j == k).unwrap()];
    assert_eq!(at(0), 1.0);
    assert!((at(1) - 1.0 / 3.0).abs() < 1e-15);
    assert!((at(-1) - 1.0 / 3.0).abs() < 1e-15);
    assert!((at(2) / at(1) - (3.0 - 0.5) / (3.0 + 0.5)).abs() < 1e-15);
}

#[test]
fn discrete_weights_start_at_the_lowest_index() {
    let p = RepresentationParams::discrete(3, Side::Lower);
    assert_eq!(p.window(6), vec![-6, -5, -4, -3]);
    let w = basis_weights(&p, 6).unwrap();
    assert_eq!(w[3], 1.0);
    // (2m-1-s)/(2m-1+s) with s = 5
    assert!((w[2] - 2.0 / 12.0).abs() < 1e-15);
}

#[test]
fn weights_are_positive_across_parameters() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for i in 0..1000 {
        let p = match i % 3 {
            0 => RepresentationParams::principal(rng.random_range(-20.0..20.0)),
            1 => RepresentationParams::complementary(rng.random_range(-0.999..0.999)),
            _ => RepresentationParams::discrete(rng.random_range(1..40), if rng.random() { Side::Upper } else { Side::Lower }),
        };
        let w = basis_weights(&p, 256).unwrap();
        assert!(w.iter().all(|&x| x > 0.0 && x.is_finite()), "{p:?}");
    }
}

#[test]
fn inadmissible_parameters() {
    for p in [
        RepresentationParams::complementary(1.5),
        RepresentationParams { series: Series::Principal, s: C::new(0.2, 1.0) },
        RepresentationParams { series: Series::Discrete { n: 2, side: Side::Upper }, s: C::new(2.0, 0.0) },
        RepresentationParams::discrete(0, Side::Upper),
    ] {
        assert!(matches!(basis_weights(&p, 8), Err(SpectralError::InadmissibleParams(_))), "{p:?}");
    }
    let p = RepresentationParams::principal(1.0);
    assert!(matches!(coercivity_constant(&p, 0.5, 16), Err(SpectralError::InadmissibleParams(_))));
    assert!(matches!(solve_poisson(&p, 0.9, &BTreeMap::new(), 16), Err(SpectralError::InadmissibleParams(_))));
    let rhs = BTreeMap::from([(15, C::new(1.0, 0.0))]);
    assert!(matches!(solve_poisson(&p, 1.5, &rhs, 16), Err(SpectralError::OutsideWindow(15))));
}

#[test]
fn theta_is_diagonal() {
    for p in grid() {
        let op = build_operator(&p, 32, Which::Theta).unwrap();
        for (i, &k) in op.indices.iter().enumerate() {
            for j in 0..op.dim() {
                let want = if i == j { C::new(0.0, k as f64) } else { C::new(0.0, 0.0) };
                assert_eq!(op.matrix[(i, j)], want);
            }
        }
    }
}

#[test]
fn bandwidth_at_most_two() {
    for p in grid() {
        for w in [Which::Theta, Which::X, Which::Y, Which::Casimir, Which::Lc(1.5)] {
            assert!(build_operator(&p, 32, w).unwrap().bandwidth() <= 2);
        }
    }
}

#[test]
fn casimir_is_scalar_on_the_interior() {
    for p in grid() {
        for k in [64, 256] {
            assert!(casimir_residual(&p, k).unwrap() <= 1e-12, "{p:?}");
        }
    }
}

#[test]
fn commutation_relations() {
    for p in grid() {
        let r = commutator_residuals(&p, 256).unwrap();
        assert!(r.iter().all(|&x| x <= 1e-12), "{p:?}: {r:?}");
    }
}

#[test]
fn two_assemblies_of_lc_agree() {
    let p = RepresentationParams::principal(1.0);
    assert!(lc_identity_check(&p, 1.0, 128).unwrap() <= 1e-12);
    for k in [64, 128, 256] {
        for q in grid() {
            for c in [1.0, 1.25, 1.5, 2.0] {
                assert!(lc_identity_check(&q, c, k).unwrap() <= 1e-12, "{q:?} c={c} K={k}");
            }
        }
    }
}

#[test]
fn lc_at_zero_is_minus_x2_minus_y2() {
    for p in grid() {
        assert_eq!(lc_identity_check(&p, 0.0, 64).unwrap(), 0.0);
        let lc = build_operator(&p, 64, Which::Lc(0.0)).unwrap();
        let x = build_operator(&p, 64, Which::X).unwrap().matrix;
        let y = build_operator(&p, 64, Which::Y).unwrap().matrix;
        let want = -(&x * &x) - &y * &y;
        assert!(interior_max(&(&lc.matrix - want), &lc.interior()) <= 1e-12);
    }
}

#[test]
fn x_and_y_are_skew_in_the_representation_norm() {
    for p in grid() {
        for w in [Which::X, Which::Y, Which::Theta] {
            let op = build_operator(&p, 64, w).unwrap();
            let m = &op.matrix + op.matrix.adjoint();
            assert!(interior_max(&m, &op.interior()) <= 1e-12, "{p:?} {w:?}");
        }
    }
}

#[test]
fn coercivity_is_positive_on_the_grid() {
    for p in grid() {
        for c in [1.0, 1.25, 1.5, 2.0] {
            let k = coercivity_constant(&p, c, 256).unwrap();
            assert!(k > 0.0, "{p:?} c={c}: {k}");
        }
    }
}

/// Smallest eigenvalue of `B^{-1/2} A B^{-1/2}` by a dense Hermitian eigensolve.
fn dense_kappa(p: &RepresentationParams, c: f64, k: i64) -> f64 {
    let (a, b) = coercivity_pencil(p, c, k).unwrap();
    let e = b.clone().symmetric_eigen();
    let inv_sqrt = DMatrix::from_diagonal(&e.eigenvalues.map(|l| C::new(1.0 / l.sqrt(), 0.0)));
    let q = &e.eigenvectors;
    let bm = q * inv_sqrt * q.adjoint();
    (&bm * a * &bm).symmetric_eigen().eigenvalues.min()
}

#[test]
fn coercivity_matches_a_dense_generalized_eigensolve() {
    for p in grid() {
        for c in [1.0, 1.5, 2.0] {
            let want = dense_kappa(&p, c, 24);
            let got = coercivity_constant(&p, c, 24).unwrap();
            assert!((got - want).abs() <= 1e-9 * (1.0 + want.abs()), "{p:?} c={c}: {got} vs {want}");
        }
    }
}

#[test]
fn coercivity_stabilizes_for_c_above_one() {
    for p in grid() {
        for c in [1.5, 2.0] {
            let a = coercivity_constant(&p, c, 256).unwrap();
            let b = coercivity_constant(&p, c, 512).unwrap();
            assert!((b - a).abs() <= 0.01 * a, "{p:?} c={c}: {a} -> {b}");
        }
    }
}

#[test]
fn coercivity_at_c_one_decays_with_the_window() {
    // L_1 is not elliptic along Θ: κ(K) ~ K⁻²
    let p = RepresentationParams::principal(1.0);
    let a = coercivity_constant(&p, 1.0, 128).unwrap();
    let b = coercivity_constant(&p, 1.0, 256).unwrap();
    assert!(b > 0.0 && (b / a - 0.25).abs() < 0.05, "{a} {b}");
}

fn apply_lc(p: &RepresentationParams, c: f64, k_max: i64, u: &BTreeMap<i64, C>) -> BTreeMap<i64, C> {
    let op = build_operator(p, k_max, Which::Lc(c)).unwrap().unscaled();
    let idx = p.window(k_max);
    let v = DVector::from_fn(idx.len(), |i, _| u.get(&idx[i]).copied().unwrap_or_default());
    let f = op * v;
    idx.iter().zip(f.iter()).filter(|(_, z)| z.norm() > 0.0).map(|(&k, &z)| (k, z)).collect()
}

#[test]
fn manufactured_solutions_are_recovered() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for p in grid() {
        for c in [1.0, 1.5, 2.0] {
            let lo = p.window(64)[0].abs().min(p.window(64).last().unwrap().abs());
            let sign = if p.window(64)[0] < 0 { -1 } else { 1 };
            let support: Vec<i64> = match p.series {
                Series::Discrete { .. } => (lo..lo + 6).map(|k| sign * k).collect(),
                _ => (-3..=3).collect(),
            };
            let u: BTreeMap<i64, C> = support
                .iter()
                .map(|&k| (k, C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))))
                .collect();
            let f = apply_lc(&p, c, 64, &u);
            let sol = solve_poisson(&p, c, &f, 64).unwrap();
            assert!(sol.residual <= 1e-10, "{p:?} c={c}: {}", sol.residual);
            for (i, &k) in sol.indices.iter().enumerate() {
                let want = u.get(&k).copied().unwrap_or_default();
                assert!((sol.coefficients[i] - want).norm() <= 1e-9, "{p:?} c={c} k={k}");
            }
        }
    }
}

#[test]
fn zero_source_gives_zero() {
    for p in grid() {
        let sol = solve_poisson(&p, 1.5, &BTreeMap::new(), 32).unwrap();
        assert!(sol.coefficients.iter().all(|z| *z == C::new(0.0, 0.0)));
    }
}

fn source(p: &RepresentationParams) -> BTreeMap<i64, C> {
    let k0 = match p.series {
        Series::Discrete { n, side: Side::Upper } => n as i64,
        Series::Discrete { n, side: Side::Lower } => -(n as i64),
        _ => 0,
    };
    let step = if k0 < 0 { -1 } else { 1 };
    BTreeMap::from([(k0, C::new(1.0, 0.0)), (k0 + step, C::new(0.0, 0.5)), (k0 + 2 * step, C::new(-0.25, 0.0))])
}

#[test]
fn solves_are_stable_under_window_doubling() {
    for p in grid() {
        for c in [1.5, 2.0] {
            let f = source(&p);
            assert!(solve_poisson(&p, c, &f, 256).unwrap().residual <= 1e-10);
            let d = doubling_change(&p, c, &f, 256).unwrap();
            assert!(d <= 1e-8, "{p:?} c={c}: {d}");
        }
    }
}

#[test]
fn sobolev_norms_are_finite_and_stable() {
    for p in grid() {
        let f = source(&p);
        let norms = |k: i64| {
            let sol = solve_poisson(&p, 1.5, &f, k).unwrap();
            (
                operator_norm_of(&p, k, &[Which::Theta, Which::Theta], &sol).unwrap(),
                operator_norm_of(&p, k, &[Which::Y, Which::Theta], &sol).unwrap(),
            )
        };
        let (a, b) = (norms(64), norms(128));
        assert!(a.0.is_finite() && a.1.is_finite());
        assert!((a.0 - b.0).abs() <= 1e-8 * a.0 && (a.1 - b.1).abs() <= 1e-8 * a.1, "{p:?}: {a:?} {b:?}");
    }
}

fn sq_norm(m: &DMatrix<C>, v: &DVector<C>) -> f64 {
    (m * v).norm_squared()
}

#[test]
fn theta_dominates_on_discrete_series() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in [2, 3, 5] {
        for side in [Side::Upper, Side::Lower] {
            let p = RepresentationParams::discrete(n, side);
            let k_max = 48;
            let [x, y, th] = [Which::X, Which::Y, Which::Theta].map(|w| build_operator(&p, k_max, w).unwrap().matrix);
            let int = build_operator(&p, k_max, Which::Theta).unwrap().interior();
            for _ in 0..1000 {
                let mut f = DVector::zeros(x.nrows());
                for &i in &int {
                    f[i] = C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                }
                assert!(sq_norm(&th, &f) > sq_norm(&x, &f) + sq_norm(&y, &f));
            }
        }
    }
}

#[test]
fn lowest_discrete_series_is_the_equality_case() {
    // Casimir 0 at n = 1: ‖Xf‖² + ‖Yf‖² = ‖Θf‖²
    let p = RepresentationParams::discrete(1, Side::Upper);
    let [x, y, th] = [Which::X, Which::Y, Which::Theta].map(|w| build_operator(&p, 32, w).unwrap().matrix);
    let int = build_operator(&p, 32, Which::Theta).unwrap().interior();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut f = DVector::zeros(x.nrows());
    for &i in &int {
        f[i] = C::new(rng.random_range(-1.0..1.0), 0.0);
    }
    let (t, xy) = (sq_norm(&th, &f), sq_norm(&x, &f) + sq_norm(&y, &f));
    assert!((t - xy).abs() <= 1e-10 * t, "{t} {xy}");
}
