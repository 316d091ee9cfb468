use std::cmp::Ordering;

use super::expr::dot;
use super::{Expression, FunctionError};

/// A constraint in canonical form, all terms moved to the left side.
#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    /// `aᵀx ≤ b`
    AffineLe { a: Vec<f64>, b: f64 },
    /// `aᵀx = b`
    AffineEq { a: Vec<f64>, b: f64 },
    /// `g(x) ≤ 0` for a convex scalar `g`.
    ConvexLe { g: Expression },
}

/// Which side of a box a single-coordinate constraint bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    Lower(usize, f64),
    Upper(usize, f64),
}

impl Constraint {
    pub fn le(a: Vec<f64>, b: f64) -> Self {
        Constraint::AffineLe { a, b }
    }

    pub fn ge(a: Vec<f64>, b: f64) -> Self {
        Constraint::AffineLe { a: a.into_iter().map(|v| -v).collect(), b: -b }
    }

    pub fn eq(a: Vec<f64>, b: f64) -> Self {
        Constraint::AffineEq { a, b }
    }

    /// `lo ≤ x ≤ hi` as `2d` affine rows.
    pub fn box_bounds(lo: &[f64], hi: &[f64]) -> Vec<Constraint> {
        let d = lo.len();
        let mut out = Vec::with_capacity(2 * d);
        for k in 0..d {
            let mut e = vec![0.0; d];
            e[k] = 1.0;
            out.push(Constraint::ge(e.clone(), lo[k]));
            out.push(Constraint::le(e, hi[k]));
        }
        out
    }

    pub fn dim(&self) -> usize {
        match self {
            Constraint::AffineLe { a, .. } | Constraint::AffineEq { a, .. } => a.len(),
            Constraint::ConvexLe { g } => g.in_dim(),
        }
    }

    pub fn is_affine(&self) -> bool {
        !matches!(self, Constraint::ConvexLe { .. })
    }

    pub fn is_equality(&self) -> bool {
        matches!(self, Constraint::AffineEq { .. })
    }

    /// Left side minus right side; for equalities the absolute residual.
    pub fn violation(&self, x: &[f64]) -> Result<f64, FunctionError> {
        if x.len() != self.dim() {
            return Err(FunctionError::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(match self {
            Constraint::AffineLe { a, b } => dot(a, x) - b,
            Constraint::AffineEq { a, b } => (dot(a, x) - b).abs(),
            Constraint::ConvexLe { g } => g.value(x)?,
        })
    }

    pub fn satisfied(&self, x: &[f64], tol: f64) -> Result<bool, FunctionError> {
        Ok(self.violation(x)? <= tol)
    }

    /// Idempotent normalization: convex rows whose function is affine become
    /// affine rows.
    pub fn canonical(&self) -> Constraint {
        match self {
            Constraint::ConvexLe { g } => match g.as_affine() {
                Some((m, off)) => Constraint::AffineLe { a: m.row(0).iter().copied().collect(), b: -off[0] },
                None => self.clone(),
            },
            other => other.clone(),
        }
    }

    /// `Some` when this is an affine inequality on a single coordinate.
    pub fn as_bound(&self) -> Option<Bound> {
        let Constraint::AffineLe { a, b } = self else { return None };
        let mut nz = a.iter().enumerate().filter(|(_, v)| **v != 0.0);
        let (k, &coef) = nz.next()?;
        if nz.next().is_some() {
            return None;
        }
        Some(if coef > 0.0 { Bound::Upper(k, b / coef) } else { Bound::Lower(k, b / coef) })
    }

    /// Affine row `(a, b)` for affine constraints.
    pub fn affine_row(&self) -> Option<(&[f64], f64)> {
        match self {
            Constraint::AffineLe { a, b } | Constraint::AffineEq { a, b } => Some((a, *b)),
            Constraint::ConvexLe { .. } => None,
        }
    }

    /// Total order on affine constraints by bit pattern, used to make solves
    /// independent of the order constraints were received in.
    pub fn canonical_cmp(&self, other: &Constraint) -> Ordering {
        let key = |c: &Constraint| -> (u8, Vec<u64>) {
            match c {
                Constraint::AffineLe { a, b } => (0, a.iter().chain([b]).map(|v| v.to_bits()).collect()),
                Constraint::AffineEq { a, b } => (1, a.iter().chain([b]).map(|v| v.to_bits()).collect()),
                Constraint::ConvexLe { g } => (2, g.fingerprint().iter().map(|&v| v as u64).collect()),
            }
        };
        key(self).cmp(&key(other))
    }
}

/// `lhs (≤|=|≥) rhs` as written by a user, before canonicalization.
#[derive(Debug, Clone, PartialEq)]
pub struct Relation {
    pub lhs: Expression,
    pub sense: Sense,
    pub rhs: Expression,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

/// Right-hand operand of a relation: a scalar broadcast to the left side's
/// shape, or another expression.
pub enum Operand {
    Scalar(f64),
    Expr(Expression),
}

impl From<f64> for Operand {
    fn from(v: f64) -> Self {
        Operand::Scalar(v)
    }
}

impl From<Expression> for Operand {
    fn from(e: Expression) -> Self {
        Operand::Expr(e)
    }
}

impl Expression {
    fn relation(self, sense: Sense, rhs: Operand) -> Relation {
        let rhs = match rhs {
            Operand::Scalar(v) => Expression::constant(self.in_dim(), vec![v; self.out_dim()]),
            Operand::Expr(e) => e,
        };
        Relation { lhs: self, sense, rhs }
    }

    pub fn le(self, rhs: impl Into<Operand>) -> Relation {
        self.relation(Sense::Le, rhs.into())
    }

    pub fn ge(self, rhs: impl Into<Operand>) -> Relation {
        self.relation(Sense::Ge, rhs.into())
    }

    pub fn equals(self, rhs: impl Into<Operand>) -> Relation {
        self.relation(Sense::Eq, rhs.into())
    }
}

/// Moves a relation to canonical `g(x) ≤ 0` / `aᵀx = b` rows. Vector-valued
/// affine relations expand to one row per component.
pub fn canonicalize(rel: Relation) -> Result<Vec<Constraint>, FunctionError> {
    let Relation { lhs, sense, rhs } = rel;
    let diff = match sense {
        Sense::Le | Sense::Eq => lhs.minus(rhs)?,
        Sense::Ge => rhs.minus(lhs)?,
    };
    if let Some((m, off)) = diff.as_affine() {
        return Ok((0..m.nrows())
            .map(|r| {
                let a: Vec<f64> = m.row(r).iter().copied().collect();
                match sense {
                    Sense::Eq => Constraint::AffineEq { a, b: -off[r] },
                    _ => Constraint::AffineLe { a, b: -off[r] },
                }
            })
            .collect());
    }
    if sense == Sense::Eq || !diff.is_convex() {
        return Err(FunctionError::NonConvex);
    }
    if !diff.is_scalar() {
        return Err(FunctionError::NotScalar(diff.out_dim()));
    }
    Ok(vec![Constraint::ConvexLe { g: diff }])
}
