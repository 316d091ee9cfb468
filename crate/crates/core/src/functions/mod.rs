//! Symbolic convex functions with exact gradients, and constraints in
//! canonical `g(x) ≤ 0` form.
//!
//! ```
//! use dopt::functions::{canonicalize, Expression};
//!
//! let x = Expression::variable(2);
//! let objective = Expression::squared_norm(x.clone()).unwrap();
//! let mut constraints = canonicalize(x.clone().ge(-1.0)).unwrap();
//! constraints.extend(canonicalize(x.le(1.0)).unwrap());
//! assert_eq!(constraints.len(), 4);
//! assert_eq!(objective.value(&[1.0, 2.0]).unwrap(), 5.0);
//! ```

mod constraint;
mod expr;

pub use constraint::{canonicalize, Bound, Constraint, Operand, Relation, Sense};
pub use expr::{sigmoid, softplus, Expression, SYMMETRY_TOL};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FunctionError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("expected a scalar expression, got output dimension {0}")]
    NotScalar(usize),
    #[error("{0} requires an affine inner expression")]
    NotAffine(&'static str),
    #[error("quadratic form is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("sum of zero terms")]
    EmptySum,
    #[error("constraint is not convex in canonical form")]
    NonConvex,
    #[error("label must be -1 or +1, got {0}")]
    BadLabel(f64),
}

/// `log(1 + exp(-ℓ (wᵀp + b)))` over the stacked variable `(w, b) ∈ R^{d+1}`.
pub fn logistic_loss_term(point: &[f64], label: f64) -> Result<Expression, FunctionError> {
    if label != 1.0 && label != -1.0 {
        return Err(FunctionError::BadLabel(label));
    }
    let a: Vec<f64> = point.iter().chain([&1.0]).map(|v| -label * v).collect();
    Expression::logistic(Expression::linear(&a, 0.0))
}

/// `ℓ (wᵀp + b) ≥ 1` in canonical form `-ℓ[p, 1]ᵀ(w, b) ≤ -1`.
pub fn margin_constraint(point: &[f64], label: f64) -> Result<Constraint, FunctionError> {
    if label != 1.0 && label != -1.0 {
        return Err(FunctionError::BadLabel(label));
    }
    let a: Vec<f64> = point.iter().chain([&1.0]).map(|v| -label * v).collect();
    Ok(Constraint::AffineLe { a, b: -1.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const LN2: f64 = std::f64::consts::LN_2;

    fn random_point(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
        (0..d).map(|_| rng.random_range(-3.0..3.0)).collect()
    }

    /// Central differences, step 1e-5.
    fn fd_gradient(e: &Expression, x: &[f64]) -> Vec<f64> {
        let h = 1e-5;
        (0..x.len())
            .map(|k| {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[k] += h;
                xm[k] -= h;
                (e.value(&xp).unwrap() - e.value(&xm).unwrap()) / (2.0 * h)
            })
            .collect()
    }

    /// One instance of every scalar variant over R^3.
    fn variants() -> Vec<(&'static str, Expression)> {
        let x = Expression::variable(3);
        let m = DMatrix::from_row_slice(2, 3, &[1.0, -2.0, 0.5, 0.3, 0.0, 1.5]);
        let aff = Expression::affine(m, vec![0.2, -1.0]).unwrap();
        let p = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.0, 0.5, 1.0, 0.2, 0.0, 0.2, 3.0]);
        let quad = Expression::quadratic(p, vec![1.0, -1.0, 0.5], 2.0).unwrap();
        let logi = Expression::logistic(Expression::linear(&[0.7, -1.2, 0.4], 0.3)).unwrap();
        let sq = Expression::squared_norm(aff.clone()).unwrap();
        vec![
            ("affine", Expression::linear(&[1.0, 2.0, -3.0], 4.0)),
            ("quadratic", quad.clone()),
            ("squared_norm_var", Expression::squared_norm(x).unwrap()),
            ("squared_norm_affine", sq.clone()),
            ("logistic", logi.clone()),
            ("sum", Expression::sum(vec![quad, logi.clone(), sq.clone()]).unwrap()),
            ("scale", 2.5 * logi),
            ("constant", Expression::constant(3, vec![7.0])),
        ]
    }

    #[test]
    fn evaluate_examples() {
        let sq = Expression::squared_norm(Expression::variable(2)).unwrap();
        assert_eq!(sq.value(&[0.0, 0.0]).unwrap(), 0.0);
        let l = Expression::logistic(Expression::linear(&[0.0, 0.0], 0.0)).unwrap();
        assert!((l.value(&[5.0, -1.0]).unwrap() - LN2).abs() < 1e-15);
        let q = Expression::quadratic(DMatrix::identity(2, 2), vec![0.0; 2], 0.0).unwrap();
        assert_eq!(q.value(&[1.0, 2.0]).unwrap(), 2.5);
        assert!(matches!(sq.value(&[1.0]), Err(FunctionError::DimensionMismatch { .. })));
    }

    #[test]
    fn subgradient_examples() {
        let sq = Expression::squared_norm(Expression::variable(2)).unwrap();
        assert_eq!(sq.subgradient(&[1.0, -1.0]).unwrap(), vec![2.0, -2.0]);
        assert!(Expression::variable(2).subgradient(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn logistic_gradient_is_sigmoid_times_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = [0.7, -1.2, 0.4];
        let e = Expression::logistic(Expression::linear(&a, 0.3)).unwrap();
        for _ in 0..20 {
            let x = random_point(&mut rng, 3);
            let z = a.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() + 0.3;
            let g = e.subgradient(&x).unwrap();
            for k in 0..3 {
                assert!((g[k] - sigmoid(z) * a[k]).abs() < 1e-15);
            }
            let fd = fd_gradient(&e, &x);
            for k in 0..3 {
                assert!((g[k] - fd[k]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn sum_gradient_is_sum_of_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let vs = variants();
        let (f, g) = (&vs[1].1, &vs[4].1);
        let s = Expression::sum(vec![f.clone(), g.clone()]).unwrap();
        for _ in 0..10 {
            let x = random_point(&mut rng, 3);
            let gs = s.subgradient(&x).unwrap();
            let gf = f.subgradient(&x).unwrap();
            let gg = g.subgradient(&x).unwrap();
            for k in 0..3 {
                assert!((gs[k] - (gf[k] + gg[k])).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn every_variant_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for (name, e) in variants() {
            let mut worst = 0.0f64;
            for _ in 0..20 {
                let x = random_point(&mut rng, 3);
                let g = e.subgradient(&x).unwrap();
                for (a, b) in g.iter().zip(fd_gradient(&e, &x)) {
                    worst = worst.max((a - b).abs());
                }
            }
            assert!(worst < 1e-6, "{name}: max fd error {worst:e}");
        }
    }

    #[test]
    fn every_variant_is_midpoint_convex() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for (name, e) in variants() {
            assert!(e.is_convex(), "{name}");
            for _ in 0..50 {
                let x = random_point(&mut rng, 3);
                let y = random_point(&mut rng, 3);
                let mid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 0.5 * a + 0.5 * b).collect();
                let lhs = e.value(&mid).unwrap();
                let rhs = 0.5 * e.value(&x).unwrap() + 0.5 * e.value(&y).unwrap();
                assert!(lhs <= rhs + 1e-10, "{name}");
            }
        }
    }

    #[test]
    fn quadratic_collapse_matches_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for (name, e) in variants() {
            let Some((p, q, r)) = e.as_quadratic() else {
                assert!(name.contains("logistic") || name == "sum" || name == "scale", "{name}");
                continue;
            };
            let x = random_point(&mut rng, 3);
            let xv = nalgebra::DVector::from_column_slice(&x);
            let v = 0.5 * xv.dot(&(&p * &xv)) + q.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() + r;
            assert!((v - e.value(&x).unwrap()).abs() < 1e-10, "{name}");
        }
    }

    #[test]
    fn constructor_validation() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(matches!(Expression::quadratic(bad, vec![0.0; 2], 0.0), Err(FunctionError::NotSymmetric(_))));
        let sq = Expression::squared_norm(Expression::variable(2)).unwrap();
        assert!(Expression::logistic(sq.clone()).is_err());
        assert!(Expression::sum(vec![sq, Expression::variable(3)]).is_err());
        assert!(!(-1.0 * Expression::squared_norm(Expression::variable(2)).unwrap()).is_convex());
    }

    #[test]
    fn canonicalize_box_from_listing() {
        let rows = canonicalize(Expression::variable(2).ge(-1.0)).unwrap();
        assert_eq!(
            rows,
            vec![Constraint::AffineLe { a: vec![-1.0, 0.0], b: 1.0 }, Constraint::AffineLe { a: vec![0.0, -1.0], b: 1.0 }]
        );
    }

    #[test]
    fn canonicalize_trivial_and_margin() {
        let rows = canonicalize(Expression::linear(&[0.0, 0.0], 0.0).le(1.0)).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].violation(&[3.0, -8.0]).unwrap(), -1.0);
        // ℓ(wᵀp + b) ≥ 1 with ℓ = 1, p = (1, 0)
        let lhs = Expression::linear(&[1.0, 0.0, 1.0], 0.0);
        let rows = canonicalize(lhs.ge(1.0)).unwrap();
        assert_eq!(rows, vec![Constraint::AffineLe { a: vec![-1.0, -0.0, -1.0], b: -1.0 }]);
        assert_eq!(rows[0].violation(&[2.0, 0.0, 0.0]).unwrap(), -1.0);
        assert_eq!(rows[0], margin_constraint(&[1.0, 0.0], 1.0).unwrap());
    }

    #[test]
    fn canonicalize_rejects_nonconvex() {
        let sq = Expression::squared_norm(Expression::variable(2)).unwrap();
        assert_eq!(canonicalize(sq.clone().ge(1.0)), Err(FunctionError::NonConvex));
        assert_eq!(canonicalize(sq.clone().equals(1.0)), Err(FunctionError::NonConvex));
        let ok = canonicalize(sq.le(1.0)).unwrap();
        assert!(matches!(ok[0], Constraint::ConvexLe { .. }));
        assert_eq!(ok[0].violation(&[1.0, 1.0]).unwrap(), 1.0);
    }

    #[test]
    fn canonical_is_idempotent_and_satisfied_matches_violation() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let sq = Expression::squared_norm(Expression::variable(2)).unwrap();
        let cs = vec![
            Constraint::ConvexLe { g: Expression::linear(&[1.0, 2.0], -1.0) },
            Constraint::ConvexLe { g: sq.minus(Expression::constant(2, vec![1.0])).unwrap() },
            Constraint::le(vec![1.0, -1.0], 0.5),
            Constraint::eq(vec![1.0, 1.0], 0.0),
        ];
        assert_eq!(cs[0].canonical(), Constraint::AffineLe { a: vec![1.0, 2.0], b: 1.0 });
        for c in &cs {
            assert_eq!(c.canonical().canonical(), c.canonical());
            for _ in 0..20 {
                let x = random_point(&mut rng, 2);
                assert_eq!(c.satisfied(&x, 0.0).unwrap(), c.violation(&x).unwrap() <= 0.0);
            }
        }
    }

    #[test]
    fn bounds_are_detected() {
        let b = Constraint::box_bounds(&[-1.0, -2.0], &[1.0, 2.0]);
        assert_eq!(b[0].as_bound(), Some(Bound::Lower(0, -1.0)));
        assert_eq!(b[3].as_bound(), Some(Bound::Upper(1, 2.0)));
        assert_eq!(Constraint::le(vec![1.0, 1.0], 0.0).as_bound(), None);
    }

    #[test]
    fn logistic_loss_examples() {
        let t = logistic_loss_term(&[0.0, 0.0], 1.0).unwrap();
        assert!((t.value(&[0.0, 0.0, 0.0]).unwrap() - LN2).abs() < 1e-15);
        let t = logistic_loss_term(&[3.0, 2.0], -1.0).unwrap();
        let expected = (1.0 + 10f64.exp()).ln();
        assert!((t.value(&[0.0, 0.0, 10.0]).unwrap() - expected).abs() < 1e-9);
        assert!(matches!(logistic_loss_term(&[0.0], 0.5), Err(FunctionError::BadLabel(_))));
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let x = random_point(&mut rng, 3);
            for (a, b) in t.subgradient(&x).unwrap().iter().zip(fd_gradient(&t, &x)) {
                assert!((a - b).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn softplus_is_stable() {
        assert_eq!(softplus(800.0), 800.0);
        assert!(softplus(-800.0) >= 0.0);
        assert!((sigmoid(-800.0)).abs() < 1e-300);
    }

    #[test]
    fn fingerprint_is_structural() {
        let a = logistic_loss_term(&[1.0, 2.0], 1.0).unwrap();
        let b = logistic_loss_term(&[1.0, 2.0], 1.0).unwrap();
        let c = logistic_loss_term(&[1.0, 2.0], -1.0).unwrap();
        assert_eq!(a.fingerprint(), b.fingerprint());
        assert_ne!(a.fingerprint(), c.fingerprint());
    }
}
