use nalgebra::{DMatrix, DVector};
use sha2::{Digest, Sha256};

use super::FunctionError;

/// Symmetry tolerance for quadratic-form matrices.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// A function of a single root variable `x ∈ R^d`, built from a closed set of
/// convex-friendly variants with exact values and gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    kind: Kind,
    in_dim: usize,
    out_dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Variable,
    Constant(Vec<f64>),
    /// `M x + q` with `M` of shape `out × in`.
    Affine { matrix: DMatrix<f64>, offset: Vec<f64> },
    /// `½ xᵀ P x + qᵀ x + r`.
    Quadratic { p: DMatrix<f64>, q: Vec<f64>, r: f64 },
    SquaredNorm(Box<Expression>),
    /// `log(1 + exp(inner))` with a scalar affine inner.
    Logistic(Box<Expression>),
    Sum(Vec<Expression>),
    Scale(f64, Box<Expression>),
}

impl Expression {
    pub fn variable(dim: usize) -> Self {
        Self { kind: Kind::Variable, in_dim: dim, out_dim: dim }
    }

    pub fn constant(in_dim: usize, value: Vec<f64>) -> Self {
        let out_dim = value.len();
        Self { kind: Kind::Constant(value), in_dim, out_dim }
    }

    pub fn affine(matrix: DMatrix<f64>, offset: Vec<f64>) -> Result<Self, FunctionError> {
        if matrix.nrows() != offset.len() {
            return Err(FunctionError::DimensionMismatch { expected: matrix.nrows(), got: offset.len() });
        }
        let (out_dim, in_dim) = matrix.shape();
        Ok(Self { kind: Kind::Affine { matrix, offset }, in_dim, out_dim })
    }

    /// Scalar `aᵀx + b`.
    pub fn linear(a: &[f64], b: f64) -> Self {
        let matrix = DMatrix::from_row_slice(1, a.len(), a);
        Self { kind: Kind::Affine { matrix, offset: vec![b] }, in_dim: a.len(), out_dim: 1 }
    }

    pub fn quadratic(p: DMatrix<f64>, q: Vec<f64>, r: f64) -> Result<Self, FunctionError> {
        let d = q.len();
        if p.shape() != (d, d) {
            return Err(FunctionError::DimensionMismatch { expected: d, got: p.nrows() });
        }
        let asym = (&p - p.transpose()).amax();
        if asym > SYMMETRY_TOL {
            return Err(FunctionError::NotSymmetric(asym));
        }
        Ok(Self { kind: Kind::Quadratic { p, q, r }, in_dim: d, out_dim: 1 })
    }

    /// `‖inner‖²` for an affine inner expression.
    pub fn squared_norm(inner: Expression) -> Result<Self, FunctionError> {
        if !inner.is_affine() {
            return Err(FunctionError::NotAffine("squared norm"));
        }
        let in_dim = inner.in_dim;
        Ok(Self { kind: Kind::SquaredNorm(Box::new(inner)), in_dim, out_dim: 1 })
    }

    pub fn logistic(inner: Expression) -> Result<Self, FunctionError> {
        if !inner.is_affine() {
            return Err(FunctionError::NotAffine("logistic"));
        }
        if inner.out_dim != 1 {
            return Err(FunctionError::NotScalar(inner.out_dim));
        }
        let in_dim = inner.in_dim;
        Ok(Self { kind: Kind::Logistic(Box::new(inner)), in_dim, out_dim: 1 })
    }

    pub fn sum(terms: Vec<Expression>) -> Result<Self, FunctionError> {
        let first = terms.first().ok_or(FunctionError::EmptySum)?;
        let (in_dim, out_dim) = (first.in_dim, first.out_dim);
        for t in &terms {
            if t.in_dim != in_dim {
                return Err(FunctionError::DimensionMismatch { expected: in_dim, got: t.in_dim });
            }
            if t.out_dim != out_dim {
                return Err(FunctionError::DimensionMismatch { expected: out_dim, got: t.out_dim });
            }
        }
        Ok(Self { kind: Kind::Sum(terms), in_dim, out_dim })
    }

    pub fn scale(c: f64, inner: Expression) -> Self {
        let (in_dim, out_dim) = (inner.in_dim, inner.out_dim);
        Self { kind: Kind::Scale(c, Box::new(inner)), in_dim, out_dim }
    }

    /// `self - other`, keeping the tree inside the variant set.
    pub fn minus(self, other: Expression) -> Result<Self, FunctionError> {
        Self::sum(vec![self, Self::scale(-1.0, other)])
    }

    /// Select rows `rows` of the root variable as an affine expression.
    pub fn select(dim: usize, rows: &[usize]) -> Self {
        let mut m = DMatrix::zeros(rows.len(), dim);
        for (r, &c) in rows.iter().enumerate() {
            m[(r, c)] = 1.0;
        }
        Self { kind: Kind::Affine { matrix: m, offset: vec![0.0; rows.len()] }, in_dim: dim, out_dim: rows.len() }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn is_scalar(&self) -> bool {
        self.out_dim == 1
    }

    pub fn is_affine(&self) -> bool {
        match &self.kind {
            Kind::Variable | Kind::Constant(_) | Kind::Affine { .. } => true,
            Kind::Quadratic { p, .. } => p.iter().all(|&v| v == 0.0),
            Kind::SquaredNorm(_) | Kind::Logistic(_) => false,
            Kind::Sum(terms) => terms.iter().all(Expression::is_affine),
            Kind::Scale(_, inner) => inner.is_affine(),
        }
    }

    /// Structural convexity: affine pieces, PSD-by-construction leaves, sums
    /// and nonnegative scalings. Quadratic forms are trusted to be PSD.
    pub fn is_convex(&self) -> bool {
        match &self.kind {
            Kind::Sum(terms) => terms.iter().all(Expression::is_convex),
            Kind::Scale(c, inner) => inner.is_affine() || (*c >= 0.0 && inner.is_convex()),
            _ => true,
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), FunctionError> {
        if x.len() != self.in_dim {
            return Err(FunctionError::DimensionMismatch { expected: self.in_dim, got: x.len() });
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>, FunctionError> {
        self.check_dim(x)?;
        Ok(self.eval_unchecked(x))
    }

    /// Value of a scalar expression.
    pub fn value(&self, x: &[f64]) -> Result<f64, FunctionError> {
        if self.out_dim != 1 {
            return Err(FunctionError::NotScalar(self.out_dim));
        }
        Ok(self.eval(x)?[0])
    }

    fn eval_unchecked(&self, x: &[f64]) -> Vec<f64> {
        match &self.kind {
            Kind::Variable => x.to_vec(),
            Kind::Constant(v) => v.clone(),
            Kind::Affine { matrix, offset } => {
                let mut out = offset.clone();
                for (r, o) in out.iter_mut().enumerate() {
                    *o += (0..matrix.ncols()).map(|c| matrix[(r, c)] * x[c]).sum::<f64>();
                }
                out
            }
            Kind::Quadratic { p, q, r } => {
                let xv = DVector::from_column_slice(x);
                let quad = 0.5 * xv.dot(&(p * &xv));
                vec![quad + dot(q, x) + r]
            }
            Kind::SquaredNorm(inner) => vec![inner.eval_unchecked(x).iter().map(|v| v * v).sum()],
            Kind::Logistic(inner) => vec![softplus(inner.eval_unchecked(x)[0])],
            Kind::Sum(terms) => {
                let mut acc = vec![0.0; self.out_dim];
                for t in terms {
                    for (a, v) in acc.iter_mut().zip(t.eval_unchecked(x)) {
                        *a += v;
                    }
                }
                acc
            }
            Kind::Scale(c, inner) => inner.eval_unchecked(x).into_iter().map(|v| c * v).collect(),
        }
    }

    /// Exact Jacobian, `out_dim × in_dim`.
    pub fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>, FunctionError> {
        self.check_dim(x)?;
        Ok(self.jacobian_unchecked(x))
    }

    fn jacobian_unchecked(&self, x: &[f64]) -> DMatrix<f64> {
        match &self.kind {
            Kind::Variable => DMatrix::identity(self.in_dim, self.in_dim),
            Kind::Constant(_) => DMatrix::zeros(self.out_dim, self.in_dim),
            Kind::Affine { matrix, .. } => matrix.clone(),
            Kind::Quadratic { p, q, .. } => {
                let g = p * DVector::from_column_slice(x) + DVector::from_column_slice(q);
                DMatrix::from_row_slice(1, self.in_dim, g.as_slice())
            }
            Kind::SquaredNorm(inner) => {
                let v = DVector::from_vec(inner.eval_unchecked(x));
                let g = 2.0 * inner.jacobian_unchecked(x).transpose() * v;
                DMatrix::from_row_slice(1, self.in_dim, g.as_slice())
            }
            Kind::Logistic(inner) => sigmoid(inner.eval_unchecked(x)[0]) * inner.jacobian_unchecked(x),
            Kind::Sum(terms) => {
                let mut acc = DMatrix::zeros(self.out_dim, self.in_dim);
                for t in terms {
                    acc += t.jacobian_unchecked(x);
                }
                acc
            }
            Kind::Scale(c, inner) => *c * inner.jacobian_unchecked(x),
        }
    }

    /// Gradient of a scalar expression. Every variant is differentiable, so this
    /// is the gradient; the name leaves room for piecewise variants.
    pub fn subgradient(&self, x: &[f64]) -> Result<Vec<f64>, FunctionError> {
        if self.out_dim != 1 {
            return Err(FunctionError::NotScalar(self.out_dim));
        }
        Ok(self.jacobian(x)?.row(0).iter().copied().collect())
    }

    /// Collapses an affine tree to `(M, q)` with value `M x + q`.
    pub fn as_affine(&self) -> Option<(DMatrix<f64>, Vec<f64>)> {
        if !self.is_affine() {
            return None;
        }
        let zero = vec![0.0; self.in_dim];
        Some((self.jacobian_unchecked(&zero), self.eval_unchecked(&zero)))
    }

    /// Collapses a scalar quadratic-or-affine tree to `(P, q, r)` with value
    /// `½ xᵀPx + qᵀx + r`. Logistic terms make this `None`.
    pub fn as_quadratic(&self) -> Option<(DMatrix<f64>, Vec<f64>, f64)> {
        if self.out_dim != 1 {
            return None;
        }
        let d = self.in_dim;
        match &self.kind {
            Kind::Quadratic { p, q, r } => Some((p.clone(), q.clone(), *r)),
            Kind::SquaredNorm(inner) => {
                let (m, off) = inner.as_affine()?;
                let offv = DVector::from_vec(off);
                let p = 2.0 * m.transpose() * &m;
                let q = 2.0 * m.transpose() * &offv;
                Some((p, q.iter().copied().collect(), offv.norm_squared()))
            }
            Kind::Logistic(_) => None,
            Kind::Sum(terms) => {
                let mut p = DMatrix::zeros(d, d);
                let mut q = vec![0.0; d];
                let mut r = 0.0;
                for t in terms {
                    let (tp, tq, tr) = t.as_quadratic()?;
                    p += tp;
                    q.iter_mut().zip(tq).for_each(|(a, b)| *a += b);
                    r += tr;
                }
                Some((p, q, r))
            }
            Kind::Scale(c, inner) => {
                let (p, q, r) = inner.as_quadratic()?;
                Some((*c * p, q.into_iter().map(|v| c * v).collect(), c * r))
            }
            Kind::Variable | Kind::Constant(_) | Kind::Affine { .. } => {
                let (m, off) = self.as_affine()?;
                Some((DMatrix::zeros(d, d), m.row(0).iter().copied().collect(), off[0]))
            }
        }
    }

    /// Stable structural digest; equal trees with bit-identical data hash equal.
    pub fn fingerprint(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        self.digest_into(&mut h);
        h.finalize().into()
    }

    fn digest_into(&self, h: &mut Sha256) {
        let put_f = |h: &mut Sha256, v: &[f64]| {
            h.update((v.len() as u64).to_le_bytes());
            for x in v {
                h.update(x.to_bits().to_le_bytes());
            }
        };
        h.update((self.in_dim as u64).to_le_bytes());
        h.update((self.out_dim as u64).to_le_bytes());
        match &self.kind {
            Kind::Variable => h.update([0u8]),
            Kind::Constant(v) => {
                h.update([1u8]);
                put_f(h, v);
            }
            Kind::Affine { matrix, offset } => {
                h.update([2u8]);
                put_f(h, matrix.as_slice());
                put_f(h, offset);
            }
            Kind::Quadratic { p, q, r } => {
                h.update([3u8]);
                put_f(h, p.as_slice());
                put_f(h, q);
                put_f(h, &[*r]);
            }
            Kind::SquaredNorm(inner) => {
                h.update([4u8]);
                inner.digest_into(h);
            }
            Kind::Logistic(inner) => {
                h.update([5u8]);
                inner.digest_into(h);
            }
            Kind::Sum(terms) => {
                h.update([6u8]);
                h.update((terms.len() as u64).to_le_bytes());
                terms.iter().for_each(|t| t.digest_into(h));
            }
            Kind::Scale(c, inner) => {
                h.update([7u8]);
                put_f(h, &[*c]);
                inner.digest_into(h);
            }
        }
    }
}

impl std::ops::Add for Expression {
    type Output = Expression;

    /// Panics on dimension mismatch; use [`Expression::sum`] for a checked sum.
    fn add(self, rhs: Expression) -> Expression {
        Expression::sum(vec![self, rhs]).expect("dimension mismatch in expression sum")
    }
}

impl std::ops::Mul<Expression> for f64 {
    type Output = Expression;

    fn mul(self, rhs: Expression) -> Expression {
        Expression::scale(self, rhs)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `log(1 + e^z)` without overflow.
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}
