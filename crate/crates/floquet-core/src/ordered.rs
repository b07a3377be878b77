//! Finite-dimensional ordered-lattice substrate: the standard cone on R^n,
//! the induced partial order, lattice decompositions and monotone norms.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// A monotone lattice norm on R^n.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    Ell1,
    Ell2,
    EllInf,
}

impl NormKind {
    pub fn vector_norm(self, v: &DVector<f64>) -> f64 {
        match self {
            NormKind::Ell1 => v.iter().map(|x| x.abs()).sum(),
            NormKind::Ell2 => v.norm(),
            NormKind::EllInf => v.iter().fold(0.0_f64, |m, x| m.max(x.abs())),
        }
    }

    /// Induced operator norm. Exact closed forms for l1 (max column sum) and
    /// l-infinity (max row sum); power iteration on A^T A for l2.
    pub fn operator_norm(self, a: &DMatrix<f64>) -> f64 {
        match self {
            NormKind::Ell1 => (0..a.ncols())
                .map(|j| a.column(j).iter().map(|x| x.abs()).sum::<f64>())
                .fold(0.0_f64, f64::max),
            NormKind::EllInf => (0..a.nrows())
                .map(|i| a.row(i).iter().map(|x| x.abs()).sum::<f64>())
                .fold(0.0_f64, f64::max),
            NormKind::Ell2 => spectral_norm(a),
        }
    }
}

/// l2 operator norm via power iteration on the normal matrix A^T A.
fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    let n = a.ncols();
    if a.iter().all(|x| *x == 0.0) {
        return 0.0;
    }
    let ata = a.transpose() * a;
    // Slightly uneven start so a symmetric-eigenvector start cannot stall.
    let mut v = DVector::from_fn(n, |i, _| 1.0 + 1e-3 * (i as f64 + 1.0));
    v /= v.norm();
    let mut lambda = 0.0_f64;
    for _ in 0..10_000 {
        let w = &ata * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let next = v.dot(&w);
        v = w / norm;
        if (next - lambda).abs() <= 1e-14 * next.abs().max(1.0) {
            lambda = next;
            break;
        }
        lambda = next;
    }
    lambda.max(0.0).sqrt()
}

/// A vector of R^n (n >= 2) carrying cone and lattice queries. The ambient of
/// both the primal space and its dual, which is identified with R^n through
/// the dot pairing.
#[derive(Clone, Debug, PartialEq)]
pub struct ConeVector {
    coords: DVector<f64>,
}

impl ConeVector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(CoreError::InvalidConfig(format!(
                "ConeVector needs length >= 2, got {}",
                coords.len()
            )));
        }
        Ok(Self {
            coords: DVector::from_vec(coords),
        })
    }

    pub fn from_dvector(coords: DVector<f64>) -> Result<Self> {
        Self::new(coords.iter().copied().collect())
    }

    /// The normalized all-ones vector, the default focus direction.
    pub fn uniform(dim: usize, norm: NormKind) -> Result<Self> {
        let ones = Self::new(vec![1.0; dim])?;
        ones.normalized(norm)
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn as_slice(&self) -> &[f64] {
        self.coords.as_slice()
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|x| *x == 0.0)
    }

    /// Membership in the standard cone: every coordinate >= 0 (exact test).
    pub fn in_cone(&self) -> bool {
        self.in_cone_tol(0.0)
    }

    /// Cone membership with an absolute slack for boundary arithmetic.
    pub fn in_cone_tol(&self, tol: f64) -> bool {
        self.coords.iter().all(|x| *x >= -tol)
    }

    pub fn strictly_positive(&self) -> bool {
        self.coords.iter().all(|x| *x > 0.0)
    }

    /// u <= v in the cone order, i.e. v - u lies in the cone.
    pub fn leq(&self, other: &Self) -> Result<bool> {
        self.check_dim(other)?;
        Ok(self
            .coords
            .iter()
            .zip(other.coords.iter())
            .all(|(a, b)| a <= b))
    }

    /// Lattice split u = u+ - u-, |u| = u+ + u-.
    pub fn lattice_parts(&self) -> (Self, Self, Self) {
        let plus = self.coords.map(|x| x.max(0.0));
        let minus = self.coords.map(|x| (-x).max(0.0));
        let abs = &plus + &minus;
        (
            Self { coords: plus },
            Self { coords: minus },
            Self { coords: abs },
        )
    }

    pub fn norm(&self, kind: NormKind) -> f64 {
        kind.vector_norm(&self.coords)
    }

    pub fn normalized(&self, kind: NormKind) -> Result<Self> {
        let n = self.norm(kind);
        if n == 0.0 {
            return Err(CoreError::ZeroVector);
        }
        Ok(Self {
            coords: &self.coords / n,
        })
    }

    pub fn dot(&self, other: &Self) -> Result<f64> {
        self.check_dim(other)?;
        Ok(self.coords.dot(&other.coords))
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            coords: &self.coords * factor,
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Ok(Self {
            coords: &self.coords - &other.coords,
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Ok(Self {
            coords: &self.coords + &other.coords,
        })
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(CoreError::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(())
    }
}
