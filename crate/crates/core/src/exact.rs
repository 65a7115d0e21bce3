//! Exact rational linear algebra for small networks.
//!
//! Identity tests on networks with at most a dozen interior vertices are
//! run in arbitrary-precision rational arithmetic so they hold with zero
//! tolerance. Conductances must be exactly representable in binary
//! floating point (true for the 1/(2d) lattice weights and for the
//! dyadic conductances used in tests).

use crate::error::{Error, Result};
use crate::network::Network;
use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, Zero};

/// A dense matrix of arbitrary-precision rationals.
#[derive(Debug, Clone, PartialEq)]
pub struct RatMatrix {
    pub n: usize,
    /// Row-major entries, length n*n.
    pub data: Vec<BigRational>,
}

impl RatMatrix {
    pub fn zero(n: usize) -> Self {
        RatMatrix { n, data: vec![BigRational::zero(); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zero(n);
        for i in 0..n {
            m[(i, i)] = BigRational::one();
        }
        m
    }

    pub fn mul(&self, other: &RatMatrix) -> RatMatrix {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = RatMatrix::zero(n);
        for i in 0..n {
            for k in 0..n {
                if self[(i, k)].is_zero() {
                    continue;
                }
                for j in 0..n {
                    let t = &self[(i, k)] * &other[(k, j)];
                    out[(i, j)] += t;
                }
            }
        }
        out
    }

    /// Determinant by fraction-preserving Gaussian elimination.
    pub fn det(&self) -> BigRational {
        let n = self.n;
        let mut a = self.data.clone();
        let mut det = BigRational::one();
        for col in 0..n {
            // pivot: first nonzero entry at or below the diagonal
            let pivot = (col..n).find(|&r| !a[r * n + col].is_zero());
            let pivot = match pivot {
                Some(p) => p,
                None => return BigRational::zero(),
            };
            if pivot != col {
                for j in 0..n {
                    a.swap(col * n + j, pivot * n + j);
                }
                det = -det;
            }
            let p = a[col * n + col].clone();
            det *= &p;
            for r in col + 1..n {
                if a[r * n + col].is_zero() {
                    continue;
                }
                let f = &a[r * n + col] / &p;
                for j in col..n {
                    let t = &f * &a[col * n + j];
                    a[r * n + j] -= t;
                }
            }
        }
        det
    }

    /// Exact inverse by Gauss-Jordan elimination.
    pub fn inverse(&self) -> Result<RatMatrix> {
        let n = self.n;
        let mut a = self.data.clone();
        let mut inv = Self::identity(n).data;
        for col in 0..n {
            let pivot = (col..n)
                .find(|&r| !a[r * n + col].is_zero())
                .ok_or_else(|| Error::LinearAlgebra("singular rational matrix".into()))?;
            if pivot != col {
                for j in 0..n {
                    a.swap(col * n + j, pivot * n + j);
                    inv.swap(col * n + j, pivot * n + j);
                }
            }
            let p = a[col * n + col].clone();
            for j in 0..n {
                a[col * n + j] /= &p;
                inv[col * n + j] /= &p;
            }
            for r in 0..n {
                if r == col || a[r * n + col].is_zero() {
                    continue;
                }
                let f = a[r * n + col].clone();
                for j in 0..n {
                    let t = &f * &a[col * n + j];
                    a[r * n + j] -= t;
                    let t = &f * &inv[col * n + j];
                    inv[r * n + j] -= t;
                }
            }
        }
        Ok(RatMatrix { n, data: inv })
    }
}

impl std::ops::Index<(usize, usize)> for RatMatrix {
    type Output = BigRational;
    fn index(&self, (i, j): (usize, usize)) -> &BigRational {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for RatMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut BigRational {
        &mut self.data[i * self.n + j]
    }
}

/// Converts an exactly-representable f64 to a rational.
pub fn rational_from_f64(x: f64) -> Result<BigRational> {
    BigRational::from_float(x)
        .ok_or_else(|| Error::InvalidArgument(format!("{x} is not a finite float")))
}

/// The network Laplacian over interior vertices, exactly:
/// `L[x][x] = lambda_x`, `L[x][y] = -c(x,y)`.
pub fn laplacian_exact(network: &Network) -> Result<RatMatrix> {
    let n = network.n_interior();
    let mut m = RatMatrix::zero(n);
    for e in network.edges() {
        let c = rational_from_f64(e.c)?;
        let (pa, pb) = (network.interior_position(e.a), network.interior_position(e.b));
        if let Some(i) = pa {
            m[(i, i)] += c.clone();
        }
        if let Some(j) = pb {
            m[(j, j)] += c.clone();
        }
        if let (Some(i), Some(j)) = (pa, pb) {
            m[(i, j)] -= c.clone();
            m[(j, i)] -= c;
        }
    }
    Ok(m)
}

/// Exact rational as an integer, if it is one.
pub fn as_integer(x: &BigRational) -> Option<BigInt> {
    if x.denom().is_one() || x.denom() == &BigInt::from(-1) {
        Some(x.to_integer())
    } else {
        None
    }
}

/// `true` when all entries of `m` match the identity exactly.
pub fn is_identity(m: &RatMatrix) -> bool {
    let n = m.n;
    (0..n).all(|i| {
        (0..n).all(|j| {
            let want = if i == j { BigRational::one() } else { BigRational::zero() };
            m[(i, j)] == want
        })
    })
}

/// Sanity bound used by property tests: max |entry|.
pub fn max_abs(m: &RatMatrix) -> BigRational {
    m.data.iter().map(|x| x.abs()).max().unwrap_or_else(BigRational::zero)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::FromPrimitive;

    fn rat(p: i64, q: i64) -> BigRational {
        BigRational::new(BigInt::from(p), BigInt::from(q))
    }

    #[test]
    fn two_site_laplacian_exact() {
        let net = Network::lattice_box(2, &[2, 1]).unwrap();
        let l = laplacian_exact(&net).unwrap();
        assert_eq!(l[(0, 0)], rat(1, 1));
        assert_eq!(l[(0, 1)], rat(-1, 4));
        assert_eq!(l[(1, 0)], rat(-1, 4));
        assert_eq!(l[(1, 1)], rat(1, 1));
        assert_eq!(l.det(), rat(15, 16));
    }

    #[test]
    fn two_site_green_exact() {
        let net = Network::lattice_box(2, &[2, 1]).unwrap();
        let l = laplacian_exact(&net).unwrap();
        let g = l.inverse().unwrap();
        assert_eq!(g[(0, 0)], rat(16, 15));
        assert_eq!(g[(0, 1)], rat(4, 15));
        assert!(is_identity(&g.mul(&l)));
        assert!(is_identity(&l.mul(&g)));
    }

    #[test]
    fn square_box_det() {
        // 2x2 box: the interior is a 4-cycle; det(I - A/4) = 3/4.
        let net = Network::lattice_box(2, &[2, 2]).unwrap();
        let l = laplacian_exact(&net).unwrap();
        assert_eq!(l.det(), rat(3, 4));
    }

    #[test]
    fn one_dimensional_chain_green() {
        // Unit conductances on a path with interiors {1,2}: L = [[2,-1],[-1,2]].
        let mut b = crate::network::NetworkBuilder::new();
        let x1 = b.add_interior();
        let x2 = b.add_interior();
        let l0 = b.add_boundary();
        let r0 = b.add_boundary();
        b.add_edge(l0, x1, 1.0);
        b.add_edge(x1, x2, 1.0);
        b.add_edge(x2, r0, 1.0);
        let net = b.build().unwrap();
        let l = laplacian_exact(&net).unwrap();
        assert_eq!(l[(0, 0)], rat(2, 1));
        assert_eq!(l[(0, 1)], rat(-1, 1));
        let g = l.inverse().unwrap();
        assert_eq!(g[(0, 0)], rat(2, 3));
        assert_eq!(g[(0, 1)], rat(1, 3));
        assert_eq!(g[(1, 1)], rat(2, 3));
    }

    #[test]
    fn determinant_of_singular_matrix_is_zero() {
        let mut m = RatMatrix::zero(2);
        m[(0, 0)] = rat(1, 1);
        m[(0, 1)] = rat(2, 1);
        m[(1, 0)] = rat(2, 1);
        m[(1, 1)] = rat(4, 1);
        assert!(m.det().is_zero());
        assert!(m.inverse().is_err());
    }

    #[test]
    fn rational_from_float_is_exact_for_dyadics() {
        assert_eq!(rational_from_f64(0.25).unwrap(), rat(1, 4));
        assert_eq!(rational_from_f64(1.0 / 6.0).unwrap(), BigRational::from_f64(1.0 / 6.0).unwrap());
    }
}
